#pragma once

// Reference implementations used to check the library. They share no code
// with it: plain arrays, std::mt19937 streams, textbook algorithms.

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace oracle {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;  // [row][col]
using Quat = std::array<double, 4>;                 // w, x, y, z

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline Vec3 scaled(const Vec3& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }
inline Vec3 unit(const Vec3& a) { return scaled(a, 1.0 / std::sqrt(dot(a, a))); }

// 6D decode by hand: columns Z = r1 / |r1|, Y = Gram-Schmidt(r2), X = Y x Z.
inline Mat3 decode6d(const std::array<double, 6>& v) {
  const Vec3 z = unit({v[0], v[1], v[2]});
  const Vec3 r2{v[3], v[4], v[5]};
  const double p = dot(z, r2);
  const Vec3 y = unit({r2[0] - p * z[0], r2[1] - p * z[1], r2[2] - p * z[2]});
  const Vec3 x = cross(y, z);
  Mat3 m{};
  for (int i = 0; i < 3; ++i) {
    m[i][0] = x[i];
    m[i][1] = y[i];
    m[i][2] = z[i];
  }
  return m;
}

// Cyclic Jacobi on a symmetric 4x4 matrix; returns the unit eigenvector of
// the largest eigenvalue and the eigenvalues sorted descending.
inline std::pair<Quat, std::array<double, 4>> jacobi_top_eigen(std::array<std::array<double, 4>, 4> a) {
  std::array<std::array<double, 4>, 4> v{};
  for (int i = 0; i < 4; ++i) v[i][i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < 4; ++p)
      for (int q = p + 1; q < 4; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-30) break;
    for (int p = 0; p < 4; ++p) {
      for (int q = p + 1; q < 4; ++q) {
        if (a[p][q] == 0.0) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < 4; ++k) {
          const double akp = a[k][p];
          const double akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (int k = 0; k < 4; ++k) {
          const double apk = a[p][k];
          const double aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (int k = 0; k < 4; ++k) {
          const double vkp = v[k][p];
          const double vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  int best = 0;
  for (int i = 1; i < 4; ++i)
    if (a[i][i] > a[best][best]) best = i;
  Quat q{v[0][best], v[1][best], v[2][best], v[3][best]};
  std::array<double, 4> evals{a[0][0], a[1][1], a[2][2], a[3][3]};
  std::sort(evals.begin(), evals.end(), std::greater<>());
  return {q, evals};
}

// Markley average: top eigenvector of sum q q^T, sign fixed so w >= 0
// (first nonzero component positive when w == 0).
inline Quat markley(const std::vector<Quat>& qs) {
  std::array<std::array<double, 4>, 4> m{};
  for (const auto& q : qs)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) m[i][j] += q[i] * q[j];
  Quat q = jacobi_top_eigen(m).first;
  const double n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
  for (double& c : q) c /= n;
  for (double c : q) {
    if (c != 0.0) {
      if (c < 0) for (double& d : q) d = -d;
      break;
    }
  }
  return q;
}

inline Quat random_quat(std::mt19937_64& gen) {
  std::normal_distribution<double> n(0.0, 1.0);
  Quat q{n(gen), n(gen), n(gen), n(gen)};
  const double s = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
  for (double& c : q) c /= s;
  return q;
}

inline Mat3 quat_to_mat(const Quat& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  return {{{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
           {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
           {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}}};
}

inline Vec3 random_unit(std::mt19937_64& gen) {
  std::normal_distribution<double> n(0.0, 1.0);
  return unit({n(gen), n(gen), n(gen)});
}

// Full scan of a row-major raster: {(x, y) : v >= 0.8 * max}, column-major
// collection then sorted by (y, x).
inline std::vector<std::pair<int, int>> brute_candidates(const std::vector<float>& px, int w, int h) {
  float mx = 0.0f;
  for (float v : px) mx = std::max(mx, v);
  std::vector<std::pair<int, int>> out;
  if (mx <= 0.0f) return out;
  for (int x = 0; x < w; ++x)
    for (int y = 0; y < h; ++y)
      if (static_cast<double>(px[static_cast<std::size_t>(y * w + x)]) >= 0.8 * static_cast<double>(mx))
        out.emplace_back(y, x);
  std::sort(out.begin(), out.end());
  for (auto& p : out) std::swap(p.first, p.second);
  return out;
}

inline double sorted_median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

// Quarter-sigma rule over 2D points.
inline std::pair<double, double> quarter_sigma_filter(const std::vector<std::pair<double, double>>& pts) {
  std::vector<double> us, vs;
  for (const auto& [u, v] : pts) {
    us.push_back(u);
    vs.push_back(v);
  }
  const double mu = sorted_median(us);
  const double mv = sorted_median(vs);
  std::vector<double> d;
  for (const auto& [u, v] : pts) d.push_back(std::hypot(u - mu, v - mv));
  double mean = 0.0;
  for (double x : d) mean += x;
  mean /= static_cast<double>(d.size());
  double var = 0.0;
  for (double x : d) var += (x - mean) * (x - mean);
  const double sigma = std::sqrt(var / static_cast<double>(d.size()));
  double su = 0.0, sv = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (d[i] > 0.25 * sigma) continue;
    su += pts[i].first;
    sv += pts[i].second;
    ++n;
  }
  if (n == 0) return {mu, mv};
  return {su / n, sv / n};
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("trocar_dock_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace oracle
