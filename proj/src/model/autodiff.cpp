#include "crossmae/model/autodiff.hpp"

#include <cmath>

#include "crossmae/core/errors.hpp"

namespace crossmae::ad {

namespace {
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
}  // namespace

int Tape::push(Mat value, bool needs_grad, std::function<void(Tape&)> back) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

void Tape::ensure_grad(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
}

Var Tape::leaf(Mat value, bool needs_grad) {
  return {push(std::move(value), needs_grad, nullptr)};
}

Var Tape::matmul(Var a, Var b) {
  const int ia = a.id, ib = b.id;
  if (nodes_[ia].value.cols() != nodes_[ib].value.rows())
    throw InternalError("matmul: inner dimension mismatch");
  Mat v = nodes_[ia].value * nodes_[ib].value;
  const bool needs = ng(ia) || ng(ib);
  const int out = push(std::move(v), needs, [ia, ib](Tape& t) {
    const Mat& go = t.nodes_.back().grad;  // unused placeholder
    (void)go;
  });
  // Replace closure now that out id is known.
  nodes_[out].back = [ia, ib, out](Tape& t) {
    const Mat& go = t.nodes_[out].grad;
    if (t.ng(ia)) {
      t.ensure_grad(ia);
      t.g(ia).noalias() += go * t.nodes_[ib].value.transpose();
    }
    if (t.ng(ib)) {
      t.ensure_grad(ib);
      t.g(ib).noalias() += t.nodes_[ia].value.transpose() * go;
    }
  };
  return {out};
}

Var Tape::matmul_nt(Var a, Var b) {
  const int ia = a.id, ib = b.id;
  if (nodes_[ia].value.cols() != nodes_[ib].value.cols())
    throw InternalError("matmul_nt: inner dimension mismatch");
  Mat v = nodes_[ia].value * nodes_[ib].value.transpose();
  const bool needs = ng(ia) || ng(ib);
  const int out = push(std::move(v), needs, nullptr);
  nodes_[out].back = [ia, ib, out](Tape& t) {
    const Mat& go = t.nodes_[out].grad;
    if (t.ng(ia)) {
      t.ensure_grad(ia);
      t.g(ia).noalias() += go * t.nodes_[ib].value;
    }
    if (t.ng(ib)) {
      t.ensure_grad(ib);
      t.g(ib).noalias() += go.transpose() * t.nodes_[ia].value;
    }
  };
  return {out};
}

Var Tape::add(Var a, Var b) {
  const int ia = a.id, ib = b.id;
  Mat v = nodes_[ia].value + nodes_[ib].value;
  const int out = push(std::move(v), ng(ia) || ng(ib), nullptr);
  nodes_[out].back = [ia, ib, out](Tape& t) {
    const Mat& go = t.nodes_[out].grad;
    if (t.ng(ia)) {
      t.ensure_grad(ia);
      t.g(ia) += go;
    }
    if (t.ng(ib)) {
      t.ensure_grad(ib);
      t.g(ib) += go;
    }
  };
  return {out};
}

Var Tape::sub(Var a, Var b) {
  const int ia = a.id, ib = b.id;
  Mat v = nodes_[ia].value - nodes_[ib].value;
  const int out = push(std::move(v), ng(ia) || ng(ib), nullptr);
  nodes_[out].back = [ia, ib, out](Tape& t) {
    const Mat& go = t.nodes_[out].grad;
    if (t.ng(ia)) {
      t.ensure_grad(ia);
      t.g(ia) += go;
    }
    if (t.ng(ib)) {
      t.ensure_grad(ib);
      t.g(ib) -= go;
    }
  };
  return {out};
}

Var Tape::add_rowvec(Var a, Var row) {
  const int ia = a.id, ir = row.id;
  if (nodes_[ir].value.rows() != 1 || nodes_[ir].value.cols() != nodes_[ia].value.cols())
    throw InternalError("add_rowvec: shape mismatch");
  Mat v = nodes_[ia].value;
  v.rowwise() += nodes_[ir].value.row(0);
  const int out = push(std::move(v), ng(ia) || ng(ir), nullptr);
  nodes_[out].back = [ia, ir, out](Tape& t) {
    const Mat& go = t.nodes_[out].grad;
    if (t.ng(ia)) {
      t.ensure_grad(ia);
      t.g(ia) += go;
    }
    if (t.ng(ir)) {
      t.ensure_grad(ir);
      t.g(ir).row(0) += go.colwise().sum();
    }
  };
  return {out};
}

Var Tape::add_const(Var a, const Mat& c) {
  const int ia = a.id;
  Mat v = nodes_[ia].value + c;
  const int out = push(std::move(v), ng(ia), nullptr);
  nodes_[out].back = [ia, out](Tape& t) {
    if (t.ng(ia)) {
      t.ensure_grad(ia);
      t.g(ia) += t.nodes_[out].grad;
    }
  };
  return {out};
}

Var Tape::scale(Var a, double s) {
  const int ia = a.id;
  Mat v = nodes_[ia].value * s;
  const int out = push(std::move(v), ng(ia), nullptr);
  nodes_[out].back = [ia, s, out](Tape& t) {
    if (t.ng(ia)) {
      t.ensure_grad(ia);
      t.g(ia) += t.nodes_[out].grad * s;
    }
  };
  return {out};
}

Var Tape::softmax_rows(Var a) {
  const int ia = a.id;
  Mat v = nodes_[ia].value;
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    const double m = v.row(r).maxCoeff();
    v.row(r) = (v.row(r).array() - m).exp();
    v.row(r) /= v.row(r).sum();
  }
  const int out = push(std::move(v), ng(ia), nullptr);
  nodes_[out].back = [ia, out](Tape& t) {
    if (!t.ng(ia)) return;
    t.ensure_grad(ia);
    const Mat& y = t.nodes_[out].value;
    const Mat& go = t.nodes_[out].grad;
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const double dot = y.row(r).dot(go.row(r));
      t.g(ia).row(r).array() +=
          y.row(r).array() * (go.row(r).array() - dot);
    }
  };
  return {out};
}

Var Tape::layer_norm(Var x, Var gamma, Var beta, double eps) {
  const int ix = x.id, ig = gamma.id, ib = beta.id;
  const Mat& xv = nodes_[ix].value;
  const Eigen::Index n = xv.rows(), c = xv.cols();
  Mat xhat(n, c);
  Eigen::VectorXd inv_std(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mu = xv.row(r).mean();
    const double var = (xv.row(r).array() - mu).square().mean();
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std(r) = is;
    xhat.row(r) = (xv.row(r).array() - mu) * is;
  }
  Mat v = xhat;
  for (Eigen::Index r = 0; r < n; ++r)
    v.row(r) = v.row(r).cwiseProduct(nodes_[ig].value.row(0)) + nodes_[ib].value.row(0);
  const bool needs = ng(ix) || ng(ig) || ng(ib);
  const int out = push(std::move(v), needs, nullptr);
  // xhat and inv_std captured by value for the backward pass.
  nodes_[out].back = [ix, ig, ib, out, xhat, inv_std](Tape& t) {
    const Mat& go = t.nodes_[out].grad;
    const Eigen::Index c2 = go.cols();
    if (t.ng(ig)) {
      t.ensure_grad(ig);
      t.g(ig).row(0) += (go.array() * xhat.array()).colwise().sum().matrix();
    }
    if (t.ng(ib)) {
      t.ensure_grad(ib);
      t.g(ib).row(0) += go.colwise().sum();
    }
    if (t.ng(ix)) {
      t.ensure_grad(ix);
      const Mat& gv = t.nodes_[ig].value;
      for (Eigen::Index r = 0; r < go.rows(); ++r) {
        Eigen::RowVectorXd dxhat = go.row(r).cwiseProduct(gv.row(0));
        const double m1 = dxhat.mean();
        const double m2 = dxhat.cwiseProduct(xhat.row(r)).mean();
        t.g(ix).row(r).array() +=
            inv_std(r) * (dxhat.array() - m1 - xhat.row(r).array() * m2);
        (void)c2;
      }
    }
  };
  return {out};
}

Var Tape::gelu(Var x) {
  const int ix = x.id;
  Mat v = nodes_[ix].value.unaryExpr(
      [](double t) { return 0.5 * t * (1.0 + std::erf(t * kInvSqrt2)); });
  const int out = push(std::move(v), ng(ix), nullptr);
  nodes_[out].back = [ix, out](Tape& t) {
    if (!t.ng(ix)) return;
    t.ensure_grad(ix);
    const Mat& xv = t.nodes_[ix].value;
    const Mat& go = t.nodes_[out].grad;
    t.g(ix).array() +=
        go.array() * xv.unaryExpr([](double u) {
                         const double cdf = 0.5 * (1.0 + std::erf(u * kInvSqrt2));
                         const double pdf = kInvSqrt2Pi * std::exp(-0.5 * u * u);
                         return cdf + u * pdf;
                       }).array();
  };
  return {out};
}

Var Tape::slice_cols(Var x, int c0, int n) {
  const int ix = x.id;
  Mat v = nodes_[ix].value.middleCols(c0, n);
  const int out = push(std::move(v), ng(ix), nullptr);
  nodes_[out].back = [ix, c0, n, out](Tape& t) {
    if (!t.ng(ix)) return;
    t.ensure_grad(ix);
    t.g(ix).middleCols(c0, n) += t.nodes_[out].grad;
  };
  return {out};
}

Var Tape::concat_cols(const std::vector<Var>& xs) {
  Eigen::Index rows = nodes_[xs[0].id].value.rows();
  Eigen::Index cols = 0;
  bool needs = false;
  for (Var v : xs) {
    cols += nodes_[v.id].value.cols();
    needs = needs || ng(v.id);
  }
  Mat v(rows, cols);
  Eigen::Index off = 0;
  std::vector<int> ids;
  std::vector<Eigen::Index> offs;
  for (Var x : xs) {
    const Mat& xv = nodes_[x.id].value;
    v.middleCols(off, xv.cols()) = xv;
    ids.push_back(x.id);
    offs.push_back(off);
    off += xv.cols();
  }
  const int out = push(std::move(v), needs, nullptr);
  nodes_[out].back = [ids, offs, out](Tape& t) {
    const Mat& go = t.nodes_[out].grad;
    for (size_t i = 0; i < ids.size(); ++i) {
      if (!t.ng(ids[i])) continue;
      t.ensure_grad(ids[i]);
      t.g(ids[i]) += go.middleCols(offs[i], t.nodes_[ids[i]].value.cols());
    }
  };
  return {out};
}

Var Tape::concat_rows(const std::vector<Var>& xs) {
  Eigen::Index cols = nodes_[xs[0].id].value.cols();
  Eigen::Index rows = 0;
  bool needs = false;
  for (Var v : xs) {
    rows += nodes_[v.id].value.rows();
    needs = needs || ng(v.id);
  }
  Mat v(rows, cols);
  Eigen::Index off = 0;
  std::vector<int> ids;
  std::vector<Eigen::Index> offs;
  for (Var x : xs) {
    const Mat& xv = nodes_[x.id].value;
    v.middleRows(off, xv.rows()) = xv;
    ids.push_back(x.id);
    offs.push_back(off);
    off += xv.rows();
  }
  const int out = push(std::move(v), needs, nullptr);
  nodes_[out].back = [ids, offs, out](Tape& t) {
    const Mat& go = t.nodes_[out].grad;
    for (size_t i = 0; i < ids.size(); ++i) {
      if (!t.ng(ids[i])) continue;
      t.ensure_grad(ids[i]);
      t.g(ids[i]) += go.middleRows(offs[i], t.nodes_[ids[i]].value.rows());
    }
  };
  return {out};
}

Var Tape::gather_rows(Var x, std::vector<int> idx) {
  const int ix = x.id;
  Mat v(static_cast<Eigen::Index>(idx.size()), nodes_[ix].value.cols());
  for (size_t i = 0; i < idx.size(); ++i) v.row(static_cast<Eigen::Index>(i)) = nodes_[ix].value.row(idx[i]);
  const int out = push(std::move(v), ng(ix), nullptr);
  nodes_[out].back = [ix, idx = std::move(idx), out](Tape& t) {
    if (!t.ng(ix)) return;
    t.ensure_grad(ix);
    const Mat& go = t.nodes_[out].grad;
    for (size_t i = 0; i < idx.size(); ++i)
      t.g(ix).row(idx[i]) += go.row(static_cast<Eigen::Index>(i));
  };
  return {out};
}

Var Tape::scatter_rows(Var base, Var rows, std::vector<int> idx) {
  const int ib = base.id, ir = rows.id;
  if (static_cast<Eigen::Index>(idx.size()) != nodes_[ir].value.rows())
    throw InternalError("scatter_rows: index count does not match rows");
  Mat v = nodes_[ib].value;
  for (size_t i = 0; i < idx.size(); ++i)
    v.row(idx[i]) = nodes_[ir].value.row(static_cast<Eigen::Index>(i));
  const int out = push(std::move(v), ng(ib) || ng(ir), nullptr);
  nodes_[out].back = [ib, ir, idx = std::move(idx), out](Tape& t) {
    const Mat& go = t.nodes_[out].grad;
    if (t.ng(ir)) {
      t.ensure_grad(ir);
      for (size_t i = 0; i < idx.size(); ++i)
        t.g(ir).row(static_cast<Eigen::Index>(i)) += go.row(idx[i]);
    }
    if (t.ng(ib)) {
      t.ensure_grad(ib);
      Mat masked = go;
      for (int r : idx) masked.row(r).setZero();
      t.g(ib) += masked;
    }
  };
  return {out};
}

Var Tape::broadcast_row(Var row, int n) {
  const int ir = row.id;
  if (nodes_[ir].value.rows() != 1) throw InternalError("broadcast_row: expects 1 x C");
  Mat v = nodes_[ir].value.replicate(n, 1);
  const int out = push(std::move(v), ng(ir), nullptr);
  nodes_[out].back = [ir, out](Tape& t) {
    if (!t.ng(ir)) return;
    t.ensure_grad(ir);
    t.g(ir).row(0) += t.nodes_[out].grad.colwise().sum();
  };
  return {out};
}

Var Tape::masked_mse(Var pred, Mat target, std::vector<int> rows) {
  const int ip = pred.id;
  if (rows.empty()) throw InternalError("masked_mse: empty row set");
  const Eigen::Index c = nodes_[ip].value.cols();
  Mat diff(static_cast<Eigen::Index>(rows.size()), c);
  for (size_t i = 0; i < rows.size(); ++i)
    diff.row(static_cast<Eigen::Index>(i)) =
        nodes_[ip].value.row(rows[i]) - target.row(rows[i]);
  const double denom = static_cast<double>(rows.size()) * static_cast<double>(c);
  Mat v(1, 1);
  v(0, 0) = diff.squaredNorm() / denom;
  const int out = push(std::move(v), ng(ip), nullptr);
  nodes_[out].back = [ip, rows = std::move(rows), diff = std::move(diff), denom,
                      out](Tape& t) {
    if (!t.ng(ip)) return;
    t.ensure_grad(ip);
    const double go = t.nodes_[out].grad(0, 0);
    const double s = 2.0 * go / denom;
    for (size_t i = 0; i < rows.size(); ++i)
      t.g(ip).row(rows[i]) += s * diff.row(static_cast<Eigen::Index>(i));
  };
  return {out};
}

Var Tape::mean_of(const std::vector<Var>& scalars) {
  if (scalars.empty()) throw InternalError("mean_of: empty");
  Mat v(1, 1);
  double acc = 0.0;
  bool needs = false;
  std::vector<int> ids;
  for (Var s : scalars) {
    acc += nodes_[s.id].value(0, 0);
    needs = needs || ng(s.id);
    ids.push_back(s.id);
  }
  v(0, 0) = acc / static_cast<double>(scalars.size());
  const int out = push(std::move(v), needs, nullptr);
  nodes_[out].back = [ids, out](Tape& t) {
    const double go = t.nodes_[out].grad(0, 0) / static_cast<double>(ids.size());
    for (int id : ids) {
      if (!t.ng(id)) continue;
      t.ensure_grad(id);
      t.g(id)(0, 0) += go;
    }
  };
  return {out};
}

Var Tape::scale_var(Var a, Var s) {
  const int ia = a.id, is = s.id;
  const double sv = nodes_[is].value(0, 0);
  Mat v = nodes_[ia].value * sv;
  const int out = push(std::move(v), ng(ia) || ng(is), nullptr);
  nodes_[out].back = [ia, is, sv, out](Tape& t) {
    const Mat& go = t.nodes_[out].grad;
    if (t.ng(ia)) {
      t.ensure_grad(ia);
      t.g(ia) += go * sv;
    }
    if (t.ng(is)) {
      t.ensure_grad(is);
      t.g(is)(0, 0) += (go.array() * t.nodes_[ia].value.array()).sum();
    }
  };
  return {out};
}

void Tape::backward(Var root) {
  if (!root.valid()) throw InternalError("backward: invalid root");
  Node& r = nodes_[root.id];
  if (r.value.rows() != 1 || r.value.cols() != 1)
    throw InternalError("backward: root must be a 1x1 scalar");
  ensure_grad(root.id);
  r.grad(0, 0) = 1.0;
  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.needs_grad || !n.back) continue;
    if (n.grad.size() == 0) continue;  // never reached from root
    n.back(*this);
  }
}

}  // namespace crossmae::ad
