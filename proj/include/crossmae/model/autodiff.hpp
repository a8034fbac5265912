#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace crossmae::ad {

using Mat = Eigen::MatrixXd;

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Define-by-run reverse-mode tape over Eigen matrices. A fresh tape is built
// per forward pass; backward() walks nodes in reverse creation order, which
// is a valid topological order by construction.
class Tape {
 public:
  Var leaf(Mat value, bool needs_grad);
  Var constant(Mat value) { return leaf(std::move(value), false); }

  const Mat& val(Var v) const { return nodes_[v.id].value; }
  const Mat& grad(Var v) const { return nodes_[v.id].grad; }

  Var matmul(Var a, Var b);     // A (n,k) * B (k,m)
  Var matmul_nt(Var a, Var b);  // A (n,k) * B(m,k)^T
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var add_rowvec(Var a, Var row);      // row is 1 x C, broadcast over rows
  Var add_const(Var a, const Mat& c);  // constant offset, no grad through c
  Var scale(Var a, double s);
  Var softmax_rows(Var a);
  Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-6);
  Var gelu(Var x);  // exact erf form
  Var slice_cols(Var x, int c0, int n);
  Var concat_cols(const std::vector<Var>& xs);
  Var concat_rows(const std::vector<Var>& xs);
  Var gather_rows(Var x, std::vector<int> idx);
  // value = base with rows[k] written at idx[k]; idx entries must be unique.
  Var scatter_rows(Var base, Var rows, std::vector<int> idx);
  Var broadcast_row(Var row, int n);  // 1 x C -> n x C
  // Mean squared error over the listed rows (all columns): 1x1 scalar.
  Var masked_mse(Var pred, Mat target, std::vector<int> rows);
  Var mean_of(const std::vector<Var>& scalars);  // mean of 1x1 vars
  Var scale_var(Var a, Var s);                   // a * s(0,0), s is 1x1

  // Seeds d(root)/d(root) = 1 and accumulates into every needs_grad node.
  void backward(Var root);

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool needs_grad = false;
    std::function<void(Tape&)> back;
  };
  std::vector<Node> nodes_;

  int push(Mat value, bool needs_grad, std::function<void(Tape&)> back);
  Mat& g(int id) { return nodes_[id].grad; }
  bool ng(int id) const { return nodes_[id].needs_grad; }
  void ensure_grad(int id);

  friend struct GradAccess;
};

}  // namespace crossmae::ad
