#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "netlat/errors.hpp"

namespace netlat::tensor {

using Matrix = Eigen::MatrixXd;
using Sparse = Eigen::SparseMatrix<double>;

class Tape;

// Handle into a Tape node. Cheap to copy; valid until the tape is cleared.
class Var {
 public:
  Var() = default;
  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  explicit operator bool() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

struct Param {
  Matrix value;
  Matrix grad;
  Matrix adam_m;  // first/second moment state, persists across steps
  Matrix adam_v;
};

class ParamStore {
 public:
  Param& add(const std::string& name, Matrix init);
  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) > 0; }
  void zero_grads();
  std::map<std::string, Param>& entries() { return params_; }
  const std::map<std::string, Param>& entries() const { return params_; }

  long adam_steps = 0;

 private:
  std::map<std::string, Param> params_;
};

void adam_step(ParamStore& store, double lr, double beta1 = 0.9, double beta2 = 0.999,
               double eps = 1e-8);

// Per-batch reverse-mode tape. Single-threaded during construction/backward;
// many tapes over one frozen store may run concurrently for inference.
class Tape {
 public:
  Var constant(Matrix value);
  // trainable leaf bound to a store entry; memoized so each name appears once
  Var param(ParamStore& store, const std::string& name);
  // backprop from a 1x1 loss; accumulates parameter gradients into the store(s)
  void backward(Var loss);
  void clear();

  // --- internals shared with the free-function ops ---
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    std::function<void(Tape&, const Matrix&)> pull;  // routes grad to parents
  };
  int emplace(Matrix value, bool needs_grad, std::function<void(Tape&, const Matrix&)> pull);
  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  void accumulate(int id, const Matrix& delta);
  Var wrap(int id) { return Var(this, id); }
  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<Node> nodes_;
  struct Binding {
    ParamStore* store;
    std::string name;
    int node_id;
  };
  std::vector<Binding> bindings_;
  std::map<std::pair<ParamStore*, std::string>, int> binding_index_;
};

// forward ops; all validate shapes and throw ShapeError with both shapes named
Var matmul(Var a, Var b);
Var spmm(const Sparse& a, Var x);  // constant sparse left factor
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var cmul(Var a, Var b);                    // elementwise
Var cdiv_const(Var a, const Matrix& b);    // elementwise divide by constant
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var scale_by(Var m, Var s);      // s is 1x1
Var scale_rows(Var m, Var col);  // row i scaled by col(i, 0)
Var add_rowvec(Var m, Var row);  // broadcast a 1 x d row over all rows
Var concat_cols(const std::vector<Var>& parts);
Var cols(Var a, int start, int count);
Var rows(Var a, std::vector<int> idx);  // gather; backward scatter-adds
Var tanh_op(Var a);
Var sigmoid(Var a);
Var exp_op(Var a);
Var log_guarded(Var a, double eps = 1e-7);  // log(|x| + eps)
Var abs_op(Var a);
Var leaky_relu(Var a, double slope);
Var softplus(Var a);
Var segment_softmax(Var logits, std::vector<int> seg, int n_segments);  // logits k x 1
Var segment_sum(Var m, std::vector<int> seg, int n_segments);
Var segment_mean(Var m, std::vector<int> seg, int n_segments);
Var reduce_sum(Var a);   // 1x1
Var reduce_mean(Var a);  // 1x1

// checkpoint I/O: {format_version, config, config_hash, params:[{name, shape, values}]}
std::string config_hash(const nlohmann::json& config);
void save_checkpoint(const ParamStore& store, const nlohmann::json& config,
                     const std::string& path);
struct Checkpoint {
  ParamStore params;
  nlohmann::json config;
  std::string hash;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace netlat::tensor
