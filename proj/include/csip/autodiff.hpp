#pragma once

#include "csip/rng.hpp"
#include "csip/tensor.hpp"

#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace csip {

/// Raised when a forward pass produces a non-finite value.
struct NumericFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Tape;

/// Handle to a node on a tape. Valid only as long as the tape lives.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
};

/// Reverse-mode tape over dense 64-bit matrices. Nodes are created in
/// evaluation order, so reverse creation order is a valid topological
/// order for the backward sweep.
class Tape {
 public:
  Var leaf(const TensorPtr& p) {
    const int id = push(p->value);
    Tensor* raw = p.get();
    nodes_[id].backward = [raw](Tape& t, int self) {
      raw->accumulate(t.nodes_[self].grad);
    };
    return {this, id};
  }

  Var constant(Matrix v) { return {this, push(std::move(v))}; }

  Var constant_scalar(double v) {
    Matrix m(1, 1);
    m(0, 0) = v;
    return constant(std::move(m));
  }

  const Matrix& value(Var v) const { return nodes_[v.id].value; }

  double scalar(Var v) const {
    const Matrix& m = nodes_[v.id].value;
    if (m.size() != 1) throw std::invalid_argument("node is not scalar");
    return m(0, 0);
  }

  /// Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse, pushing
  /// gradients into parent nodes and parameter grad slots.
  void backward(Var loss) {
    if (nodes_[loss.id].value.size() != 1)
      throw std::invalid_argument("backward requires a scalar loss");
    nodes_[loss.id].grad = Matrix::Ones(1, 1);
    for (int i = loss.id; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.grad.size() == 0 || !n.backward) continue;
      n.backward(*this, i);
    }
  }

  std::size_t size() const { return nodes_.size(); }

  // -- ops -----------------------------------------------------------------

  friend Var matvec(Var w, Var x);
  friend Var add(Var a, Var b);
  friend Var sub(Var a, Var b);
  friend Var mul(Var a, Var b);
  friend Var scale(Var a, double c);
  friend Var sigmoid(Var a);
  friend Var vexp(Var a);
  friend Var square(Var a);
  friend Var sum(Var a);
  friend Var mean(Var a);
  friend Var pick(Var a, int i);
  friend Var concat(Var a, Var b);
  friend Var rows_mean(Var table, std::span<const int> rows);
  friend Var bce_with_logits(Var x, double target);
  friend Var softmax_cross_entropy(Var logits, int gold);
  friend Var dropout(Var a, double p, Xoshiro256ss& rng);

 private:
  struct Node {
    Matrix value;
    Matrix grad;  // empty until the node receives gradient
    std::function<void(Tape&, int)> backward;
  };

  int push(Matrix v) {
    Node n;
    n.value = std::move(v);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  Matrix& grad_of(int id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0)
      n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  std::vector<Node> nodes_;
};

namespace detail {
inline void check_same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw std::invalid_argument("vars from different tapes");
}
inline void check_same_shape(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("shape mismatch");
}
inline double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}
inline double stable_sigmoid(double x) {
  if (x >= 0) {
    const double z = std::exp(-x);
    return 1.0 / (1.0 + z);
  }
  const double z = std::exp(x);
  return z / (1.0 + z);
}
}  // namespace detail

inline Var matvec(Var w, Var x) {
  detail::check_same_tape(w, x);
  Tape& t = *w.tape;
  const Matrix& wm = t.value(w);
  const Matrix& xv = t.value(x);
  if (xv.cols() != 1 || wm.cols() != xv.rows())
    throw std::invalid_argument("matvec dimension mismatch");
  Var out{&t, t.push(wm * xv)};
  t.nodes_[out.id].backward = [wi = w.id, xi = x.id](Tape& tp, int self) {
    const Matrix& g = tp.nodes_[self].grad;
    tp.grad_of(wi).noalias() += g * tp.nodes_[xi].value.transpose();
    tp.grad_of(xi).noalias() += tp.nodes_[wi].value.transpose() * g;
  };
  return out;
}

inline Var add(Var a, Var b) {
  detail::check_same_tape(a, b);
  Tape& t = *a.tape;
  detail::check_same_shape(t.value(a), t.value(b));
  Var out{&t, t.push(t.value(a) + t.value(b))};
  t.nodes_[out.id].backward = [ai = a.id, bi = b.id](Tape& tp, int self) {
    const Matrix& g = tp.nodes_[self].grad;
    tp.grad_of(ai) += g;
    tp.grad_of(bi) += g;
  };
  return out;
}

inline Var sub(Var a, Var b) {
  detail::check_same_tape(a, b);
  Tape& t = *a.tape;
  detail::check_same_shape(t.value(a), t.value(b));
  Var out{&t, t.push(t.value(a) - t.value(b))};
  t.nodes_[out.id].backward = [ai = a.id, bi = b.id](Tape& tp, int self) {
    const Matrix& g = tp.nodes_[self].grad;
    tp.grad_of(ai) += g;
    tp.grad_of(bi) -= g;
  };
  return out;
}

inline Var mul(Var a, Var b) {
  detail::check_same_tape(a, b);
  Tape& t = *a.tape;
  detail::check_same_shape(t.value(a), t.value(b));
  Var out{&t, t.push(t.value(a).cwiseProduct(t.value(b)))};
  t.nodes_[out.id].backward = [ai = a.id, bi = b.id](Tape& tp, int self) {
    const Matrix& g = tp.nodes_[self].grad;
    tp.grad_of(ai) += g.cwiseProduct(tp.nodes_[bi].value);
    tp.grad_of(bi) += g.cwiseProduct(tp.nodes_[ai].value);
  };
  return out;
}

inline Var scale(Var a, double c) {
  Tape& t = *a.tape;
  Var out{&t, t.push(t.value(a) * c)};
  t.nodes_[out.id].backward = [ai = a.id, c](Tape& tp, int self) {
    tp.grad_of(ai) += tp.nodes_[self].grad * c;
  };
  return out;
}

inline Var sigmoid(Var a) {
  Tape& t = *a.tape;
  Matrix y = t.value(a).unaryExpr([](double x) { return detail::stable_sigmoid(x); });
  Var out{&t, t.push(std::move(y))};
  t.nodes_[out.id].backward = [ai = a.id](Tape& tp, int self) {
    const Matrix& y = tp.nodes_[self].value;
    const Matrix& g = tp.nodes_[self].grad;
    tp.grad_of(ai) += g.cwiseProduct(y.cwiseProduct(Matrix::Ones(y.rows(), y.cols()) - y));
  };
  return out;
}

inline Var vexp(Var a) {
  Tape& t = *a.tape;
  Var out{&t, t.push(t.value(a).array().exp().matrix())};
  t.nodes_[out.id].backward = [ai = a.id](Tape& tp, int self) {
    tp.grad_of(ai) += tp.nodes_[self].grad.cwiseProduct(tp.nodes_[self].value);
  };
  return out;
}

inline Var square(Var a) {
  Tape& t = *a.tape;
  Var out{&t, t.push(t.value(a).cwiseProduct(t.value(a)))};
  t.nodes_[out.id].backward = [ai = a.id](Tape& tp, int self) {
    tp.grad_of(ai) +=
        2.0 * tp.nodes_[self].grad.cwiseProduct(tp.nodes_[ai].value);
  };
  return out;
}

inline Var sum(Var a) {
  Tape& t = *a.tape;
  Matrix s(1, 1);
  s(0, 0) = t.value(a).sum();
  Var out{&t, t.push(std::move(s))};
  t.nodes_[out.id].backward = [ai = a.id](Tape& tp, int self) {
    const double g = tp.nodes_[self].grad(0, 0);
    tp.grad_of(ai).array() += g;
  };
  return out;
}

inline Var mean(Var a) {
  Tape& t = *a.tape;
  const double n = static_cast<double>(t.value(a).size());
  Matrix s(1, 1);
  s(0, 0) = t.value(a).sum() / n;
  Var out{&t, t.push(std::move(s))};
  t.nodes_[out.id].backward = [ai = a.id, n](Tape& tp, int self) {
    tp.grad_of(ai).array() += tp.nodes_[self].grad(0, 0) / n;
  };
  return out;
}

inline Var pick(Var a, int i) {
  Tape& t = *a.tape;
  const Matrix& v = t.value(a);
  if (v.cols() != 1 || i < 0 || i >= v.rows())
    throw std::invalid_argument("pick index out of range");
  Matrix s(1, 1);
  s(0, 0) = v(i, 0);
  Var out{&t, t.push(std::move(s))};
  t.nodes_[out.id].backward = [ai = a.id, i](Tape& tp, int self) {
    tp.grad_of(ai)(i, 0) += tp.nodes_[self].grad(0, 0);
  };
  return out;
}

inline Var concat(Var a, Var b) {
  detail::check_same_tape(a, b);
  Tape& t = *a.tape;
  const Matrix& av = t.value(a);
  const Matrix& bv = t.value(b);
  if (av.cols() != 1 || bv.cols() != 1)
    throw std::invalid_argument("concat expects column vectors");
  const Eigen::Index na = av.rows();
  Matrix y(na + bv.rows(), 1);
  y << av, bv;
  Var out{&t, t.push(std::move(y))};
  t.nodes_[out.id].backward = [ai = a.id, bi = b.id, na](Tape& tp, int self) {
    const Matrix& g = tp.nodes_[self].grad;
    tp.grad_of(ai) += g.topRows(na);
    tp.grad_of(bi) += g.bottomRows(g.rows() - na);
  };
  return out;
}

/// Mean of the selected rows of a (typically embedding-table) node,
/// returned as a column vector. Rows may repeat.
inline Var rows_mean(Var table, std::span<const int> rows) {
  Tape& t = *table.tape;
  const Matrix& m = t.value(table);
  if (rows.empty()) throw std::invalid_argument("rows_mean on empty index set");
  Vector acc = Vector::Zero(m.cols());
  for (int r : rows) {
    if (r < 0 || r >= m.rows())
      throw std::invalid_argument("rows_mean index out of range");
    acc += m.row(r).transpose();
  }
  acc /= static_cast<double>(rows.size());
  Var out{&t, t.push(acc)};
  std::vector<int> idx(rows.begin(), rows.end());
  t.nodes_[out.id].backward = [ti = table.id,
                               idx = std::move(idx)](Tape& tp, int self) {
    const Matrix& g = tp.nodes_[self].grad;
    Matrix& tg = tp.grad_of(ti);
    const double inv = 1.0 / static_cast<double>(idx.size());
    for (int r : idx) tg.row(r) += inv * g.transpose();
  };
  return out;
}

/// Elementwise binary cross-entropy with logits against a constant target,
/// in the stable softplus form: bce(x, y) = softplus(x) - y * x.
inline Var bce_with_logits(Var x, double target) {
  Tape& t = *x.tape;
  Matrix y = t.value(x).unaryExpr(
      [target](double v) { return detail::softplus(v) - target * v; });
  Var out{&t, t.push(std::move(y))};
  t.nodes_[out.id].backward = [xi = x.id, target](Tape& tp, int self) {
    const Matrix& g = tp.nodes_[self].grad;
    const Matrix& xv = tp.nodes_[xi].value;
    tp.grad_of(xi) += g.cwiseProduct(xv.unaryExpr(
        [target](double v) { return detail::stable_sigmoid(v) - target; }));
  };
  return out;
}

/// -log softmax(logits)[gold], computed via log-sum-exp.
inline Var softmax_cross_entropy(Var logits, int gold) {
  Tape& t = *logits.tape;
  const Matrix& l = t.value(logits);
  if (l.cols() != 1 || gold < 0 || gold >= l.rows())
    throw std::invalid_argument("softmax_cross_entropy: label out of range");
  const double m = l.maxCoeff();
  const double lse = m + std::log((l.array() - m).exp().sum());
  Matrix s(1, 1);
  s(0, 0) = lse - l(gold, 0);
  Var out{&t, t.push(std::move(s))};
  t.nodes_[out.id].backward = [li = logits.id, gold, lse](Tape& tp, int self) {
    const double g = tp.nodes_[self].grad(0, 0);
    const Matrix& l = tp.nodes_[li].value;
    Matrix p = (l.array() - lse).exp().matrix();
    p(gold, 0) -= 1.0;
    tp.grad_of(li) += g * p;
  };
  return out;
}

/// Inverted dropout: keeps each element with probability 1-p and scales
/// kept elements by 1/(1-p). One uniform draw per element, in storage
/// order, so the mask stream is reproducible.
inline Var dropout(Var a, double p, Xoshiro256ss& rng) {
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout p out of range");
  Tape& t = *a.tape;
  const Matrix& v = t.value(a);
  Matrix mask(v.rows(), v.cols());
  const double keep_scale = 1.0 / (1.0 - p);
  for (Eigen::Index j = 0; j < v.cols(); ++j)
    for (Eigen::Index i = 0; i < v.rows(); ++i)
      mask(i, j) = rng.uniform() < p ? 0.0 : keep_scale;
  Var out{&t, t.push(v.cwiseProduct(mask))};
  t.nodes_[out.id].backward = [ai = a.id, mask](Tape& tp, int self) {
    tp.grad_of(ai) += tp.nodes_[self].grad.cwiseProduct(mask);
  };
  return out;
}

}  // namespace csip
