#pragma once

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "nlmetro/operators.hpp"

namespace nlmetro::dynamics {

using cd = std::complex<double>;
using atomic::Matrix;

//! Lindblad equation for one atom driven by a single, fixed-polarization
//! field of complex Rabi amplitude `drive` (rad/s):
//!
//!   d rho/dt = -i [H, rho] + gamma sum_k (J_k rho J_k^dag - {K, rho}/2)
//!   H = diag(E_a - detuning * excited_a) - (drive V + conj(drive) V^dag)/2
//!   K = sum_k J_k^dag J_k
//!
//! All operators are compiled to sparse form once; rho is stored row-major
//! as n*n complex numbers.
class MasterEquation {
public:
  //! Scratch space for derivative(); one per concurrent caller.
  struct Workspace {
    std::vector<cd> product;
  };

  MasterEquation(const Eigen::VectorXd &energies,
                 const std::vector<bool> &excited, const Matrix &coupling,
                 std::span<const Matrix> jumps, double gamma,
                 const Matrix &probe);

  int dim() const { return n_; }
  double gamma() const { return gamma_; }

  Workspace make_workspace() const {
    return Workspace{std::vector<cd>(std::size_t(n_) * std::size_t(n_))};
  }

  void derivative(cd drive, double detuning, const cd *rho, cd *drho,
                  Workspace &ws) const;

  //! Split form used by the exponential integrator:
  //!   d rho_ab/dt = lambda_ab rho_ab + N_ab(rho),
  //! with lambda_ab = -i (g_a - conj(g_b)), g_a = E_a - i gamma K_aa / 2.
  //! rates() fills lambda for all n*n entries (row-major).
  void rates(double detuning, std::vector<cd> &out) const;
  //! The non-diagonal remainder N: drive coupling, off-diagonal decay and
  //! the jump feeding terms.
  void interaction(cd drive, const cd *rho, cd *out, Workspace &ws) const;

  //! Entries (a, b) that can become nonzero when the evolution starts from a
  //! diagonal state. Elements outside this support stay exactly zero, so
  //! the derivative skips them.
  bool in_support(int a, int b) const;
  //! True when every nonzero element of rho lies inside the support.
  bool supports(const Matrix &rho, double tol = 1e-14) const;
  std::size_t support_size() const;

  //! Tr[rho probe].
  cd probe_expectation(const cd *rho) const;

  //! True when field-free evolution has a closed form: diagonal decay
  //! operator and a single decay cascade (no state both fed and fed from).
  bool has_exact_free_evolution() const { return exact_free_; }
  //! Propagates rho over dt with drive = 0. Requires
  //! has_exact_free_evolution().
  void free_evolve(double detuning, double dt, cd *rho) const;

  //! Number of stored nonzeros (coupling, decay, jump products); useful to
  //! keep an eye on the cost of derivative().
  std::size_t sparse_terms() const {
    return coupling_.size() + decay_offdiag_.size() + jumps_.size();
  }

private:
  struct Coupling {
    int excited, ground;
    cd value; // V(excited, ground)
  };
  struct Entry {
    int row, col;
    cd value;
  };
  struct JumpTerm {
    int out_row, out_col, in_row, in_col;
    cd coeff; // gamma * J(out_row, in_row) * conj(J(out_col, in_col))
  };

  cd diag_rate(int a, double detuning) const;
  void build_support();
  // Z = (G - diag G) rho on the support, then N = -i (Z - Z^dag) + jumps.
  void offdiagonal(cd drive, const cd *rho, cd *out, Workspace &ws) const;

  int n_ = 0;
  double gamma_ = 0.0;
  std::vector<double> energy_;
  std::vector<double> excited_;
  std::vector<double> decay_diag_;  // K(a, a)
  std::vector<Entry> decay_offdiag_; // K(a, b), a != b
  std::vector<Coupling> coupling_;
  std::vector<JumpTerm> jumps_;
  std::vector<Entry> probe_; // probe(row, col)
  std::vector<std::vector<int>> support_; // active columns per row
  std::vector<char> support_mask_;
  bool exact_free_ = false;
};

//! Input polarization and polarimeter analysis axis for the probe.
struct ProbePolarization {
  atomic::Field input{1.0, 0.0, 0.0};   // e_V
  atomic::Field analysis{0.0, 1.0, 0.0}; // e_H
};

//! Master equation for the 24-level D2 model: coupling V = e_V . d_up,
//! recorded probe e_H . d_down (so the expectation is p_H / <J||er||J'>).
MasterEquation make_probe_model(const atomic::LevelScheme &scheme,
                                const atomic::OperatorSet &ops,
                                const ProbePolarization &pol = {});

} // namespace nlmetro::dynamics
