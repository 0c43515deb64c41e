#pragma once

// Dense bounded-variable primal simplex (two phase).
//
//   minimize c'x  subject to  A x {<=,=,>=} b,  lower <= x <= upper.
//
// Pricing is Dantzig's rule with lowest-index tie-breaking; after a run of
// degenerate pivots the solver switches to Bland's rule for the remainder of
// the phase, so it always terminates. The final basis is refactorized to
// polish the primal point and recover row duals.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace cfsearch::lp {

enum class RowSense { LessEqual, Equal, GreaterEqual };
enum class Status { Optimal, Infeasible, Unbounded };

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct LinearProgram {
  Eigen::MatrixXd A;               // m x n
  Eigen::VectorXd b;               // m
  std::vector<RowSense> sense;     // m
  Eigen::VectorXd c;               // n
  Eigen::VectorXd lower;           // n, finite
  Eigen::VectorXd upper;           // n, may be +inf

  int rows() const { return static_cast<int>(A.rows()); }
  int cols() const { return static_cast<int>(A.cols()); }
};

struct Result {
  Status status = Status::Infeasible;
  Eigen::VectorXd x;      // structural values
  Eigen::VectorXd duals;  // one per row, sign convention: c - A'y = reduced costs
  double objective = 0.0;
  int iterations = 0;
};

namespace detail {

class Tableau {
 public:
  enum class At : unsigned char { Basic, Lower, Upper };

  explicit Tableau(const LinearProgram& lp) : lp_(lp) {
    m_ = lp.rows();
    n_ = lp.cols();
    if (lp.b.size() != m_ || static_cast<int>(lp.sense.size()) != m_ || lp.c.size() != n_ ||
        lp.lower.size() != n_ || lp.upper.size() != n_)
      throw std::invalid_argument("lp: inconsistent dimensions");
    for (int j = 0; j < n_; ++j) {
      if (!std::isfinite(lp.lower(j))) throw std::invalid_argument("lp: lower bounds must be finite");
      if (lp.upper(j) < lp.lower(j)) throw std::invalid_argument("lp: lower bound exceeds upper bound");
    }
    slack_of_row_.assign(m_, -1);
    int ns = 0;
    for (int i = 0; i < m_; ++i)
      if (lp.sense[i] != RowSense::Equal) slack_of_row_[i] = n_ + ns++;
    art0_ = n_ + ns;
    total_ = art0_ + m_;

    // Original (unscaled) column matrix, kept for refactorization.
    cols_ = Eigen::MatrixXd::Zero(m_, total_);
    cols_.leftCols(n_) = lp.A;
    for (int i = 0; i < m_; ++i) {
      if (slack_of_row_[i] >= 0) cols_(i, slack_of_row_[i]) = lp.sense[i] == RowSense::LessEqual ? 1.0 : -1.0;
    }
    lo_.assign(total_, 0.0);
    hi_.assign(total_, kInf);
    for (int j = 0; j < n_; ++j) {
      lo_[j] = lp.lower(j);
      hi_[j] = lp.upper(j);
    }
    x_.assign(total_, 0.0);
    at_.assign(total_, At::Lower);
    for (int j = 0; j < n_; ++j) x_[j] = lo_[j];

    Eigen::VectorXd r = lp.b - lp.A * Eigen::Map<const Eigen::VectorXd>(x_.data(), n_);
    basis_.resize(m_);
    for (int i = 0; i < m_; ++i) {
      const int a = art0_ + i;
      cols_(i, a) = r(i) >= 0.0 ? 1.0 : -1.0;
      x_[a] = std::abs(r(i));
      at_[a] = At::Basic;
      basis_[i] = a;
    }
    T_ = cols_;
    for (int i = 0; i < m_; ++i) T_.row(i) *= cols_(i, art0_ + i);  // B = diag(+-1)
    scale_ = 1.0;
    for (int i = 0; i < m_; ++i) scale_ = std::max(scale_, std::abs(lp.b(i)));
  }

  Result solve() {
    Result res;
    // Phase 1: minimize the sum of artificials.
    std::vector<double> cost(total_, 0.0);
    for (int i = 0; i < m_; ++i) cost[art0_ + i] = 1.0;
    if (!iterate(cost, res.iterations)) throw std::logic_error("lp: phase 1 cannot be unbounded");
    double infeas = 0.0;
    for (int i = 0; i < m_; ++i) infeas += x_[art0_ + i];
    if (infeas > 1e-9 * scale_ * std::max(1, m_)) {
      res.status = Status::Infeasible;
      return res;
    }
    // Phase 2: artificials are pinned at zero.
    for (int i = 0; i < m_; ++i) {
      hi_[art0_ + i] = 0.0;
      if (at_[art0_ + i] != At::Basic) x_[art0_ + i] = 0.0;
    }
    drive_out_artificials();
    std::fill(cost.begin(), cost.end(), 0.0);
    for (int j = 0; j < n_; ++j) cost[j] = lp_.c(j);
    if (!iterate(cost, res.iterations)) {
      res.status = Status::Unbounded;
      return res;
    }
    polish(cost, res);
    res.status = Status::Optimal;
    return res;
  }

 private:
  bool fixed(int j) const { return hi_[j] - lo_[j] <= 0.0; }

  void pivot(int r, int q) {
    const double piv = T_(r, q);
    T_.row(r) /= piv;
    for (int i = 0; i < m_; ++i) {
      if (i == r) continue;
      const double f = T_(i, q);
      if (f != 0.0) T_.row(i) -= f * T_.row(r);
    }
    const double fd = d_(q);
    if (fd != 0.0) d_ -= fd * T_.row(r).transpose();
    at_[q] = At::Basic;
    basis_[r] = q;
  }

  void price(const std::vector<double>& cost) {
    d_ = Eigen::Map<const Eigen::VectorXd>(cost.data(), total_);
    for (int i = 0; i < m_; ++i) {
      const double cb = cost[basis_[i]];
      if (cb != 0.0) d_ -= cb * T_.row(i).transpose();
    }
  }

  // Returns false on unboundedness.
  bool iterate(const std::vector<double>& cost, int& iterations) {
    price(cost);
    constexpr double kDualTol = 1e-9;
    constexpr double kPivTol = 1e-9;
    const double ratio_tie = 1e-12 * scale_;
    int degenerate_run = 0;
    bool bland = false;
    const int max_iter = 50 * (m_ + total_) + 1000;
    for (int iter = 0; iter < max_iter; ++iter) {
      int q = -1;
      double best = 0.0;
      for (int j = 0; j < total_; ++j) {
        if (at_[j] == At::Basic || fixed(j)) continue;
        const double dj = d_(j);
        const bool improving = (at_[j] == At::Lower && dj < -kDualTol) || (at_[j] == At::Upper && dj > kDualTol);
        if (!improving) continue;
        if (bland) {
          q = j;
          break;
        }
        if (std::abs(dj) > best) {
          best = std::abs(dj);
          q = j;
        }
      }
      if (q < 0) return true;
      ++iterations;

      const double dir = at_[q] == At::Lower ? 1.0 : -1.0;
      double t = hi_[q] - lo_[q];  // bound flip distance
      int leave = -1;
      bool leave_to_upper = false;
      for (int i = 0; i < m_; ++i) {
        const double delta = dir * T_(i, q);
        const int bv = basis_[i];
        double lim;
        bool to_upper;
        if (delta > kPivTol) {
          lim = (x_[bv] - lo_[bv]) / delta;
          to_upper = false;
        } else if (delta < -kPivTol && std::isfinite(hi_[bv])) {
          lim = (hi_[bv] - x_[bv]) / -delta;
          to_upper = true;
        } else {
          continue;
        }
        lim = std::max(lim, 0.0);
        // Strictly smaller ratio wins; near-ties go to the lowest basic index,
        // and a tie with the entering variable's own bound flip keeps the flip.
        const bool better = lim < t - ratio_tie;
        const bool tie_wins = leave >= 0 && lim <= t + ratio_tie && bv < basis_[leave];
        if (better || tie_wins) {
          t = better ? lim : std::min(t, lim);
          leave = i;
          leave_to_upper = to_upper;
        }
      }
      if (!std::isfinite(t)) return false;

      if (t <= ratio_tie) {
        if (++degenerate_run > 30) bland = true;
      } else {
        degenerate_run = 0;
      }

      x_[q] += dir * t;
      for (int i = 0; i < m_; ++i) x_[basis_[i]] -= dir * t * T_(i, q);

      if (leave < 0) {
        at_[q] = at_[q] == At::Lower ? At::Upper : At::Lower;
        x_[q] = at_[q] == At::Lower ? lo_[q] : hi_[q];
        continue;
      }
      const int out = basis_[leave];
      pivot(leave, q);
      at_[out] = leave_to_upper ? At::Upper : At::Lower;
      x_[out] = leave_to_upper ? hi_[out] : lo_[out];
    }
    throw std::runtime_error("lp: iteration limit reached");
  }

  void drive_out_artificials() {
    for (int r = 0; r < m_; ++r) {
      if (basis_[r] < art0_) continue;
      int best = -1;
      double mag = 1e-9;
      for (int j = 0; j < art0_; ++j) {
        if (at_[j] == At::Basic) continue;
        if (std::abs(T_(r, j)) > mag) {
          mag = std::abs(T_(r, j));
          best = j;
        }
      }
      if (best < 0) continue;  // redundant row
      const int out = basis_[r];
      const double move = x_[out] / T_(r, best);
      x_[best] += move;
      for (int i = 0; i < m_; ++i)
        if (i != r) x_[basis_[i]] -= move * T_(i, best);
      pivot(r, best);
      at_[out] = At::Lower;
      x_[out] = 0.0;
    }
  }

  void polish(const std::vector<double>& cost, Result& res) {
    Eigen::MatrixXd B(m_, m_);
    Eigen::VectorXd rhs = lp_.b;
    for (int i = 0; i < m_; ++i) B.col(i) = cols_.col(basis_[i]);
    for (int j = 0; j < total_; ++j)
      if (at_[j] != At::Basic && x_[j] != 0.0) rhs -= x_[j] * cols_.col(j);
    if (m_ > 0) {
      Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
      Eigen::VectorXd xb = lu.solve(rhs);
      Eigen::VectorXd cb(m_);
      for (int i = 0; i < m_; ++i) cb(i) = cost[basis_[i]];
      res.duals = lu.transpose().solve(cb);
      if (xb.allFinite()) {
        for (int i = 0; i < m_; ++i) x_[basis_[i]] = std::clamp(xb(i), lo_[basis_[i]], hi_[basis_[i]]);
      }
    } else {
      res.duals.resize(0);
    }
    res.x.resize(n_);
    res.objective = 0.0;
    for (int j = 0; j < n_; ++j) {
      res.x(j) = x_[j];
      res.objective += lp_.c(j) * x_[j];
    }
  }

  const LinearProgram& lp_;
  int m_ = 0, n_ = 0, art0_ = 0, total_ = 0;
  double scale_ = 1.0;
  std::vector<int> slack_of_row_;
  Eigen::MatrixXd cols_;
  Eigen::MatrixXd T_;
  Eigen::VectorXd d_;
  std::vector<double> x_, lo_, hi_;
  std::vector<At> at_;
  std::vector<int> basis_;
};

}  // namespace detail

inline Result solve(const LinearProgram& lp) { return detail::Tableau(lp).solve(); }

}  // namespace cfsearch::lp
