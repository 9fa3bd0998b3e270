// Deterministic synthetic point clouds used across the test suites: eight
// distinct surfaces, reproducible from a seed so every test sees the same
// data without any files on disk.
#pragma once

#include "dpcc/geometry.hpp"

#include <vector>

namespace fixtures {

/// shape ids: 0 sphere, 1 torus, 2 cube surface, 3 cylinder, 4 cone,
/// 5 helix, 6 wave sheet, 7 twin spheres
dpcc::Mat make_shape(int which, int n_points, uint64_t seed = 2024);

/// The standard 8-cloud set, labels 0..7, already normalized to the unit ball.
std::vector<dpcc::PointCloud> shape_set(int n_points, uint64_t seed = 2024);

}  // namespace fixtures
