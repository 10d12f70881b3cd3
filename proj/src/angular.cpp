#include "nlmetro/angular.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>

namespace nlmetro::angular {

namespace {

// n! for the small arguments that occur in angular algebra.
double factorial(int n) {
  static const auto table = [] {
    std::array<double, 64> t{};
    t[0] = 1.0;
    for (std::size_t i = 1; i < t.size(); ++i)
      t[i] = t[i - 1] * double(i);
    return t;
  }();
  return table.at(static_cast<std::size_t>(n));
}

bool triangle(int a, int b, int c) {
  return c >= std::abs(a - b) && c <= a + b && (a + b + c) % 2 == 0;
}

// Triangle coefficient Delta(abc) with doubled arguments.
double delta(int a, int b, int c) {
  return std::sqrt(factorial((a + b - c) / 2) * factorial((a - b + c) / 2) *
                   factorial((-a + b + c) / 2) /
                   factorial((a + b + c) / 2 + 1));
}

int sign(int k) { return (k % 2 == 0) ? 1 : -1; }

} // namespace

double wigner_3j(int j1, int j2, int j3, int m1, int m2, int m3) {
  if (m1 + m2 + m3 != 0)
    return 0.0;
  if (!triangle(j1, j2, j3))
    return 0.0;
  if (std::abs(m1) > j1 || std::abs(m2) > j2 || std::abs(m3) > j3)
    return 0.0;
  if ((j1 + m1) % 2 != 0 || (j2 + m2) % 2 != 0 || (j3 + m3) % 2 != 0)
    return 0.0;

  // Racah formula, all quantities halved below.
  const int a = (j1 + j2 - j3) / 2;
  const int b = (j1 - m1) / 2;
  const int c = (j2 + m2) / 2;
  const int d = (j3 - j2 + m1) / 2;
  const int e = (j3 - j1 - m2) / 2;

  const int kmin = std::max({0, -d, -e});
  const int kmax = std::min({a, b, c});
  double sum = 0.0;
  for (int k = kmin; k <= kmax; ++k) {
    sum += sign(k) / (factorial(k) * factorial(a - k) * factorial(b - k) *
                      factorial(c - k) * factorial(d + k) * factorial(e + k));
  }
  const double pre =
      delta(j1, j2, j3) *
      std::sqrt(factorial((j1 + m1) / 2) * factorial((j1 - m1) / 2) *
                factorial((j2 + m2) / 2) * factorial((j2 - m2) / 2) *
                factorial((j3 + m3) / 2) * factorial((j3 - m3) / 2));
  return sign((j1 - j2 - m3) / 2) * pre * sum;
}

double wigner_6j(int j1, int j2, int j3, int j4, int j5, int j6) {
  if (!triangle(j1, j2, j3) || !triangle(j1, j5, j6) ||
      !triangle(j4, j2, j6) || !triangle(j4, j5, j3))
    return 0.0;

  const int a1 = (j1 + j2 + j3) / 2;
  const int a2 = (j1 + j5 + j6) / 2;
  const int a3 = (j4 + j2 + j6) / 2;
  const int a4 = (j4 + j5 + j3) / 2;
  const int b1 = (j1 + j2 + j4 + j5) / 2;
  const int b2 = (j2 + j3 + j5 + j6) / 2;
  const int b3 = (j3 + j1 + j6 + j4) / 2;

  const int kmin = std::max({a1, a2, a3, a4});
  const int kmax = std::min({b1, b2, b3});
  double sum = 0.0;
  for (int k = kmin; k <= kmax; ++k) {
    sum += sign(k) * factorial(k + 1) /
           (factorial(k - a1) * factorial(k - a2) * factorial(k - a3) *
            factorial(k - a4) * factorial(b1 - k) * factorial(b2 - k) *
            factorial(b3 - k));
  }
  return delta(j1, j2, j3) * delta(j1, j5, j6) * delta(j4, j2, j6) *
         delta(j4, j5, j3) * sum;
}

double clebsch_gordan(int j1, int m1, int j2, int m2, int J, int M) {
  return sign((j1 - j2 + M) / 2) * std::sqrt(double(J + 1)) *
         wigner_3j(j1, j2, J, m1, m2, -M);
}

} // namespace nlmetro::angular
