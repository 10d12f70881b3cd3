#pragma once
// Wigner 3j and 6j symbols. All angular momenta and projections are passed
// doubled (2j, 2m) so half-integer values stay exact.

namespace nlmetro::angular {

double wigner_3j(int two_j1, int two_j2, int two_j3, int two_m1, int two_m2,
                 int two_m3);

double wigner_6j(int two_j1, int two_j2, int two_j3, int two_j4, int two_j5,
                 int two_j6);

//! <j1 m1; j2 m2 | J M>
double clebsch_gordan(int two_j1, int two_m1, int two_j2, int two_m2,
                      int two_J, int two_M);

} // namespace nlmetro::angular
