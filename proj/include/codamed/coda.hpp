#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "codamed/errors.hpp"

namespace codamed::coda {

template <class Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// A sequential binary partition of J+1 parts into J ordered binary splits,
/// stored as a (J+1) x J matrix over {-1, 0, +1}. Column k contrasts the
/// parts marked +1 against the parts marked -1; parts marked 0 do not take
/// part in balance k. Construct through validate_sbp or pivotal_sbp.
struct SbpMatrix {
  Eigen::MatrixXi entries;
  std::vector<std::string> part_labels;

  Eigen::Index parts() const { return entries.rows(); }
  Eigen::Index balances() const { return entries.cols(); }
};

/// Orthonormal contrast (ilr) basis derived from an SBP. Columns satisfy
/// V^T V = I and sum to zero.
template <class Scalar = double>
struct ContrastBasisT {
  MatrixX<Scalar> v;  // (J+1) x J
  SbpMatrix source;

  Eigen::Index parts() const { return v.rows(); }
  Eigen::Index balances() const { return v.cols(); }
};
using ContrastBasis = ContrastBasisT<double>;

/// Point on the simplex: strictly positive proportions with unit sum.
template <class Scalar = double>
class CompositionT {
 public:
  template <class Derived>
  explicit CompositionT(const Eigen::MatrixBase<Derived>& proportions)
      : p_(proportions.template cast<Scalar>()) {
    if (p_.size() == 0) throw Error(errc::dimension_mismatch, "empty composition");
    Scalar total = Scalar(0);
    for (Eigen::Index j = 0; j < p_.size(); ++j) {
      if (!std::isfinite(static_cast<double>(p_[j]))) throw Error(errc::non_finite, "composition entry");
      if (!(p_[j] > Scalar(0))) throw Error(errc::all_zero, "composition entries must be strictly positive");
      total += p_[j];
    }
    if (std::abs(static_cast<double>(total) - 1.0) > 1e-12)
      throw Error(errc::config_invalid, "composition must sum to 1");
  }

  const VectorX<Scalar>& proportions() const { return p_; }
  Eigen::Index size() const { return p_.size(); }

 private:
  VectorX<Scalar> p_;
};
using Composition = CompositionT<double>;

template <class Scalar = double>
class IlrVectorT {
 public:
  template <class Derived>
  explicit IlrVectorT(const Eigen::MatrixBase<Derived>& coords)
      : m_(coords.template cast<Scalar>()) {
    for (Eigen::Index k = 0; k < m_.size(); ++k)
      if (!std::isfinite(static_cast<double>(m_[k]))) throw Error(errc::non_finite, "ilr coordinate");
  }

  const VectorX<Scalar>& coords() const { return m_; }
  Eigen::Index size() const { return m_.size(); }

 private:
  VectorX<Scalar> m_;
};
using IlrVector = IlrVectorT<double>;

/// Check an integer matrix against the SBP rules and wrap it. The rules are
/// applied column by column and the first violation is reported together
/// with the offending column:
///  - entries are -1, 0 or +1 and there are exactly rows-1 columns,
///  - every column has a non-empty +1 side and -1 side,
///  - column 1 covers all parts; the non-zero support of every later column
///    equals one side of an earlier split, and no group is split twice.
/// With J valid splits of J+1 parts every group ends up a singleton.
inline SbpMatrix validate_sbp(const Eigen::Ref<const Eigen::MatrixXi>& m,
                              std::vector<std::string> part_labels = {}) {
  const Eigen::Index rows = m.rows();
  const Eigen::Index cols = m.cols();
  if (rows < 2 || cols != rows - 1)
    throw SbpError(errc::dimension_mismatch, -1,
                   "an SBP of " + std::to_string(rows) + " parts needs " +
                       std::to_string(rows - 1) + " columns, got " + std::to_string(cols));
  for (Eigen::Index k = 0; k < cols; ++k)
    for (Eigen::Index j = 0; j < rows; ++j)
      if (m(j, k) < -1 || m(j, k) > 1)
        throw SbpError(errc::non_binary_entry, static_cast<int>(k),
                       "entry (" + std::to_string(j) + "," + std::to_string(k) + ") is " +
                           std::to_string(m(j, k)));

  std::vector<std::vector<Eigen::Index>> groups;
  {
    std::vector<Eigen::Index> root(rows);
    for (Eigen::Index j = 0; j < rows; ++j) root[j] = j;
    groups.push_back(std::move(root));
  }
  for (Eigen::Index k = 0; k < cols; ++k) {
    std::vector<Eigen::Index> pos, neg, support;
    for (Eigen::Index j = 0; j < rows; ++j) {
      if (m(j, k) == 1) pos.push_back(j);
      if (m(j, k) == -1) neg.push_back(j);
      if (m(j, k) != 0) support.push_back(j);
    }
    if (pos.empty() || neg.empty())
      throw SbpError(errc::empty_side, static_cast<int>(k), "column lacks a +1 or -1 side");
    auto it = std::find(groups.begin(), groups.end(), support);
    if (it == groups.end())
      throw SbpError(errc::not_a_tree, static_cast<int>(k),
                     k == 0 ? "column 1 must cover every part"
                            : "support is not an unsplit group from an earlier column");
    groups.erase(it);
    groups.push_back(std::move(pos));
    groups.push_back(std::move(neg));
  }
  for (const auto& g : groups)
    if (g.size() > 1)
      throw SbpError(errc::incomplete_tree, -1, "a group of size " +
                                                    std::to_string(g.size()) +
                                                    " is never resolved");

  if (part_labels.empty()) {
    part_labels.reserve(rows);
    for (Eigen::Index j = 0; j < rows; ++j) part_labels.push_back("p" + std::to_string(j + 1));
  }
  if (static_cast<Eigen::Index>(part_labels.size()) != rows)
    throw SbpError(errc::dimension_mismatch, -1, "part label count does not match rows");
  return SbpMatrix{m, std::move(part_labels)};
}

/// Pivotal SBP: balance k contrasts the k-th part (in `order`) against all
/// later parts. `order` is a 0-based permutation of the parts; empty means
/// the natural order.
inline SbpMatrix pivotal_sbp(Eigen::Index num_parts, std::vector<Eigen::Index> order = {},
                             std::vector<std::string> part_labels = {}) {
  if (num_parts < 2) throw Error(errc::dimension_mismatch, "pivotal SBP needs >= 2 parts");
  if (order.empty()) {
    order.resize(static_cast<std::size_t>(num_parts));
    for (Eigen::Index j = 0; j < num_parts; ++j) order[static_cast<std::size_t>(j)] = j;
  }
  if (static_cast<Eigen::Index>(order.size()) != num_parts)
    throw Error(errc::dimension_mismatch, "order must list every part");
  std::vector<bool> seen(static_cast<std::size_t>(num_parts), false);
  for (Eigen::Index j : order) {
    if (j < 0 || j >= num_parts || seen[static_cast<std::size_t>(j)])
      throw Error(errc::config_invalid, "order must be a permutation of the parts");
    seen[static_cast<std::size_t>(j)] = true;
  }
  Eigen::MatrixXi m = Eigen::MatrixXi::Zero(num_parts, num_parts - 1);
  for (Eigen::Index k = 0; k + 1 < num_parts; ++k) {
    m(order[static_cast<std::size_t>(k)], k) = 1;
    for (Eigen::Index j = k + 1; j < num_parts; ++j) m(order[static_cast<std::size_t>(j)], k) = -1;
  }
  return validate_sbp(m, std::move(part_labels));
}

/// Contrast matrix V of an SBP:
///   v_jk = sqrt(n+ n- / (n+ + n-)) * ( 1/n+  on the +1 side,
///                                     -1/n-  on the -1 side, 0 elsewhere ).
template <class Scalar = double>
ContrastBasisT<Scalar> basis_from_sbp(const SbpMatrix& sbp) {
  SbpMatrix checked = validate_sbp(sbp.entries, sbp.part_labels);
  const Eigen::Index rows = checked.parts();
  const Eigen::Index cols = checked.balances();
  MatrixX<Scalar> v = MatrixX<Scalar>::Zero(rows, cols);
  for (Eigen::Index k = 0; k < cols; ++k) {
    Scalar npos = Scalar(0), nneg = Scalar(0);
    for (Eigen::Index j = 0; j < rows; ++j) {
      if (checked.entries(j, k) == 1) npos += Scalar(1);
      if (checked.entries(j, k) == -1) nneg += Scalar(1);
    }
    const Scalar scale = std::sqrt(npos * nneg / (npos + nneg));
    for (Eigen::Index j = 0; j < rows; ++j) {
      if (checked.entries(j, k) == 1) v(j, k) = scale / npos;
      if (checked.entries(j, k) == -1) v(j, k) = -scale / nneg;
    }
  }
  return ContrastBasisT<Scalar>{std::move(v), std::move(checked)};
}

/// Replace zero counts by `zero_replacement`, then close to unit sum.
template <class Scalar = double, class Derived>
CompositionT<Scalar> close_counts(const Eigen::MatrixBase<Derived>& counts,
                                  Scalar zero_replacement = Scalar(0.5)) {
  if (!(zero_replacement > Scalar(0)))
    throw Error(errc::config_invalid, "zero replacement must be positive");
  VectorX<Scalar> adj = counts.template cast<Scalar>();
  bool any_positive = false;
  for (Eigen::Index j = 0; j < adj.size(); ++j) {
    if (adj[j] < Scalar(0)) throw Error(errc::negative_count, "counts must be non-negative");
    if (adj[j] > Scalar(0)) any_positive = true;
    if (adj[j] == Scalar(0)) adj[j] = zero_replacement;
  }
  if (!any_positive) throw Error(errc::all_zero, "all counts are zero");
  return CompositionT<Scalar>(adj / adj.sum());
}

template <class Scalar>
IlrVectorT<Scalar> ilr_forward(const CompositionT<Scalar>& p, const ContrastBasisT<Scalar>& basis) {
  if (p.size() != basis.parts())
    throw Error(errc::dimension_mismatch, "composition and basis disagree on parts");
  return IlrVectorT<Scalar>(basis.v.transpose() *
                            p.proportions().array().log().matrix());
}

template <class Scalar>
CompositionT<Scalar> ilr_inverse(const IlrVectorT<Scalar>& m, const ContrastBasisT<Scalar>& basis) {
  if (m.size() != basis.balances())
    throw Error(errc::dimension_mismatch, "ilr vector and basis disagree on balances");
  VectorX<Scalar> q = (basis.v * m.coords()).array().exp();
  return CompositionT<Scalar>(q / q.sum());
}

/// Orthogonal change of coordinates between two bases on the same parts:
/// P = V2^T V1, so that ilr under basis 2 equals P * (ilr under basis 1).
template <class Scalar>
MatrixX<Scalar> basis_rotation(const ContrastBasisT<Scalar>& b1, const ContrastBasisT<Scalar>& b2) {
  if (b1.parts() != b2.parts())
    throw Error(errc::dimension_mismatch, "bases live on different part counts");
  return b2.v.transpose() * b1.v;
}

}  // namespace codamed::coda
