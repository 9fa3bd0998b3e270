#include "fixtures.hpp"

#include <cmath>

namespace fixtures {

using dpcc::Mat;
using dpcc::Rng;

Mat make_shape(int which, int n_points, uint64_t seed) {
  Rng rng(dpcc::mix_seed(seed, static_cast<uint64_t>(which)));
  Mat pts(n_points, 3);
  const double pi = 3.14159265358979323846;

  for (int i = 0; i < n_points; ++i) {
    double x = 0, y = 0, z = 0;
    switch (which % 8) {
      case 0: {  // sphere
        double gx = rng.normal(), gy = rng.normal(), gz = rng.normal();
        double r = std::sqrt(gx * gx + gy * gy + gz * gz);
        if (r < 1e-9) r = 1.0;
        x = gx / r;
        y = gy / r;
        z = gz / r;
        break;
      }
      case 1: {  // torus, R=0.7 r=0.25
        double u = rng.uniform(0, 2 * pi), v = rng.uniform(0, 2 * pi);
        x = (0.7 + 0.25 * std::cos(v)) * std::cos(u);
        y = (0.7 + 0.25 * std::cos(v)) * std::sin(u);
        z = 0.25 * std::sin(v);
        break;
      }
      case 2: {  // cube surface
        int face = rng.uniform_int(0, 5);
        double a = rng.uniform(-0.6, 0.6), b = rng.uniform(-0.6, 0.6);
        double s = face % 2 == 0 ? 0.6 : -0.6;
        if (face < 2) { x = s; y = a; z = b; }
        else if (face < 4) { x = a; y = s; z = b; }
        else { x = a; y = b; z = s; }
        break;
      }
      case 3: {  // cylinder shell
        double u = rng.uniform(0, 2 * pi);
        x = 0.5 * std::cos(u);
        y = 0.5 * std::sin(u);
        z = rng.uniform(-0.7, 0.7);
        break;
      }
      case 4: {  // cone
        double u = rng.uniform(0, 2 * pi);
        double h = rng.uniform(0.0, 1.0);
        double r = 0.6 * (1.0 - h);
        x = r * std::cos(u);
        y = r * std::sin(u);
        z = 1.2 * h - 0.6;
        break;
      }
      case 5: {  // helix ribbon, two turns
        double u = rng.uniform(0.0, 1.0);
        double a = 4 * pi * u;
        x = 0.6 * std::cos(a) + 0.05 * rng.normal();
        y = 0.6 * std::sin(a) + 0.05 * rng.normal();
        z = 1.4 * u - 0.7;
        break;
      }
      case 6: {  // wave sheet
        x = rng.uniform(-0.8, 0.8);
        y = rng.uniform(-0.8, 0.8);
        z = 0.3 * std::sin(2 * pi * x) * std::cos(2 * pi * y);
        break;
      }
      default: {  // twin spheres
        double gx = rng.normal(), gy = rng.normal(), gz = rng.normal();
        double r = std::sqrt(gx * gx + gy * gy + gz * gz);
        if (r < 1e-9) r = 1.0;
        double cx = rng.uniform() < 0.5 ? -0.5 : 0.5;
        x = cx + 0.45 * gx / r;
        y = 0.45 * gy / r;
        z = 0.45 * gz / r;
        break;
      }
    }
    pts(i, 0) = x;
    pts(i, 1) = y;
    pts(i, 2) = z;
  }
  return pts;
}

std::vector<dpcc::PointCloud> shape_set(int n_points, uint64_t seed) {
  std::vector<dpcc::PointCloud> out;
  out.reserve(8);
  for (int s = 0; s < 8; ++s) {
    dpcc::PointCloud pc;
    Mat raw = make_shape(s, n_points, seed);
    pc.points = dpcc::normalize(raw, dpcc::compute_normalization(raw));
    pc.label = s;
    out.push_back(std::move(pc));
  }
  return out;
}

}  // namespace fixtures
