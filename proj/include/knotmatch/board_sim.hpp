#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "knotmatch/geometry.hpp"
#include "knotmatch/graph.hpp"

namespace knotmatch {

// A branch cone. Before the rigid motion it is the upward right circular cone
// (x^2 + y^2) / c0^2 = z^2, z > 0. Downward cones (s = 1) are first reflected
// over z = height / 2, which puts the apex at z = height. The cone is then
// rotated about x (thetaX) and y (thetaY) around its apex and translated by
// (xt, yt, zt).
struct ConeSpec {
  double slope = 0.0375;  // c0
  int orientation = 0;    // s: 0 opens upward, 1 opens downward
  double thetaX = 0.0;
  double thetaY = 0.0;
  double xt = 0.0;
  double yt = 0.0;
  double zt = 0.0;  // <= 0 for s = 0, >= 0 for s = 1

  Eigen::Vector3d apex(const BoardDims& dims) const;
  Eigen::Vector3d axis() const;  // unit, pointing into the valid nappe
  // Quadratic form M with (P - apex)' M (P - apex) = 0 on the double cone.
  Eigen::Matrix3d quadric() const;
};

struct Segment {
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  Eigen::Vector3d q = Eigen::Vector3d::Zero();
};

struct BranchRecord {
  ConeSpec cone;
  std::vector<KnotFace> faces;  // one per intersected surface, by surface
  Segment axisSegment;          // between the two farthest face centers
};

struct SimConfig {
  double rho = 25.0;
  double separation = 50.0;
  BoardDims dims;
  std::uint64_t seed = 1;
  bool reject4Faces = true;
  std::size_t maxAttempts = 10000;  // per branch
};

struct SimulatedBoard {
  Board board;  // faces sorted by x, labelled by branch
  std::vector<BranchRecord> branches;
  Matching truth;
};

ConeSpec sampleCone(std::mt19937_64& rng, const SimConfig& config);

// Elliptical section of the cone's valid nappe by a surface plane, or nothing
// when the section is not a real ellipse or its center falls off the surface.
std::optional<KnotFace> conicSection(const ConeSpec& cone, int surface, const BoardDims& dims);

// Exact minimum distance between two segments (either may be a point).
double segmentDistance(const Segment& s1, const Segment& s2);

// Throws DataError when a branch needs more than maxAttempts cones.
SimulatedBoard generateBoard(const SimConfig& config, std::mt19937_64& rng, std::string id);

// count boards, board k drawn from its own stream seeded by (seed, k).
std::vector<SimulatedBoard> generateBoards(const SimConfig& config, std::size_t count);

}  // namespace knotmatch
