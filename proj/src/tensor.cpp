#include "netlat/tensor.hpp"

#include <cmath>
#include <fstream>
#include <limits>

namespace netlat::tensor {

namespace {

std::string shape_str(const Matrix& m) {
  return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
}

void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
  }
}

Tape& tape_of(Var v, const char* op) {
  if (!v) throw ShapeError(std::string(op) + ": empty Var");
  return *v.tape();
}

}  // namespace

const Matrix& Var::value() const { return tape_->node(id_).value; }

Param& ParamStore::add(const std::string& name, Matrix init) {
  if (params_.count(name)) throw ValidationError("duplicate parameter name: " + name);
  Param p;
  p.value = std::move(init);
  p.grad = Matrix::Zero(p.value.rows(), p.value.cols());
  p.adam_m = Matrix::Zero(p.value.rows(), p.value.cols());
  p.adam_v = Matrix::Zero(p.value.rows(), p.value.cols());
  return params_.emplace(name, std::move(p)).first->second;
}

Param& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ValidationError("unknown parameter: " + name);
  return it->second;
}

const Param& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ValidationError("unknown parameter: " + name);
  return it->second;
}

void ParamStore::zero_grads() {
  for (auto& [name, p] : params_) p.grad.setZero();
}

void adam_step(ParamStore& store, double lr, double beta1, double beta2, double eps) {
  ++store.adam_steps;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(store.adam_steps));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(store.adam_steps));
  for (auto& [name, p] : store.entries()) {
    p.adam_m = beta1 * p.adam_m + (1.0 - beta1) * p.grad;
    p.adam_v = beta2 * p.adam_v.array().matrix() +
               (1.0 - beta2) * p.grad.array().square().matrix();
    const Matrix m_hat = p.adam_m / bc1;
    const Matrix v_hat = p.adam_v / bc2;
    p.value.array() -= lr * m_hat.array() / (v_hat.array().sqrt() + eps);
  }
}

int Tape::emplace(Matrix value, bool needs_grad, std::function<void(Tape&, const Matrix&)> pull) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  n.pull = std::move(pull);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

void Tape::accumulate(int id, const Matrix& delta) {
  Node& n = node(id);
  if (!n.needs_grad) return;
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  n.grad += delta;
}

Var Tape::constant(Matrix value) { return wrap(emplace(std::move(value), false, nullptr)); }

Var Tape::param(ParamStore& store, const std::string& name) {
  const auto key = std::make_pair(&store, name);
  auto it = binding_index_.find(key);
  if (it != binding_index_.end()) return wrap(it->second);
  const int id = emplace(store.at(name).value, true, nullptr);
  bindings_.push_back({&store, name, id});
  binding_index_[key] = id;
  return wrap(id);
}

void Tape::backward(Var loss) {
  if (!loss || loss.tape() != this) throw ShapeError("backward: loss not on this tape");
  Node& top = node(loss.id());
  if (top.value.rows() != 1 || top.value.cols() != 1) {
    throw ShapeError("backward: loss must be 1x1, got " + shape_str(top.value));
  }
  top.grad = Matrix::Ones(1, 1);
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = node(id);
    if (!n.needs_grad || n.grad.size() == 0 || !n.pull) continue;
    n.pull(*this, n.grad);
  }
  for (const auto& b : bindings_) {
    const Node& n = node(b.node_id);
    if (n.grad.size() != 0) b.store->at(b.name).grad += n.grad;
  }
}

void Tape::clear() {
  nodes_.clear();
  bindings_.clear();
  binding_index_.clear();
}

// ---------------------------------------------------------------------------
// ops

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, "matmul");
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul: shape mismatch " + shape_str(av) + " x " + shape_str(bv));
  }
  const int pa = a.id();
  const int pb = b.id();
  const bool ng = t.node(pa).needs_grad || t.node(pb).needs_grad;
  const int id = t.emplace(av * bv, ng, [pa, pb](Tape& tp, const Matrix& g) {
    if (tp.node(pa).needs_grad) tp.accumulate(pa, g * tp.node(pb).value.transpose());
    if (tp.node(pb).needs_grad) tp.accumulate(pb, tp.node(pa).value.transpose() * g);
  });
  return t.wrap(id);
}

Var spmm(const Sparse& a, Var x) {
  Tape& t = tape_of(x, "spmm");
  const Matrix& xv = x.value();
  if (a.cols() != xv.rows()) {
    throw ShapeError("spmm: shape mismatch (" + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + ") x " + shape_str(xv));
  }
  const int px = x.id();
  Sparse at = a.transpose();
  const int id = t.emplace(a * xv, t.node(px).needs_grad,
                           [px, at = std::move(at)](Tape& tp, const Matrix& g) {
                             tp.accumulate(px, at * g);
                           });
  return t.wrap(id);
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a, "add");
  require_same_shape("add", a.value(), b.value());
  const int pa = a.id();
  const int pb = b.id();
  const bool ng = t.node(pa).needs_grad || t.node(pb).needs_grad;
  const int id = t.emplace(a.value() + b.value(), ng, [pa, pb](Tape& tp, const Matrix& g) {
    tp.accumulate(pa, g);
    tp.accumulate(pb, g);
  });
  return t.wrap(id);
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, "sub");
  require_same_shape("sub", a.value(), b.value());
  const int pa = a.id();
  const int pb = b.id();
  const bool ng = t.node(pa).needs_grad || t.node(pb).needs_grad;
  const int id = t.emplace(a.value() - b.value(), ng, [pa, pb](Tape& tp, const Matrix& g) {
    tp.accumulate(pa, g);
    tp.accumulate(pb, -g);
  });
  return t.wrap(id);
}

Var cmul(Var a, Var b) {
  Tape& t = tape_of(a, "cmul");
  require_same_shape("cmul", a.value(), b.value());
  const int pa = a.id();
  const int pb = b.id();
  const bool ng = t.node(pa).needs_grad || t.node(pb).needs_grad;
  const int id = t.emplace(a.value().cwiseProduct(b.value()), ng,
                           [pa, pb](Tape& tp, const Matrix& g) {
                             if (tp.node(pa).needs_grad)
                               tp.accumulate(pa, g.cwiseProduct(tp.node(pb).value));
                             if (tp.node(pb).needs_grad)
                               tp.accumulate(pb, g.cwiseProduct(tp.node(pa).value));
                           });
  return t.wrap(id);
}

Var cdiv_const(Var a, const Matrix& b) {
  Tape& t = tape_of(a, "cdiv_const");
  require_same_shape("cdiv_const", a.value(), b);
  const int pa = a.id();
  Matrix inv = b.cwiseInverse();
  const int id = t.emplace(a.value().cwiseProduct(inv), t.node(pa).needs_grad,
                           [pa, inv](Tape& tp, const Matrix& g) {
                             tp.accumulate(pa, g.cwiseProduct(inv));
                           });
  return t.wrap(id);
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a, "scale");
  const int pa = a.id();
  const int id = t.emplace(a.value() * s, t.node(pa).needs_grad,
                           [pa, s](Tape& tp, const Matrix& g) { tp.accumulate(pa, g * s); });
  return t.wrap(id);
}

Var add_scalar(Var a, double s) {
  Tape& t = tape_of(a, "add_scalar");
  const int pa = a.id();
  const int id = t.emplace(a.value().array() + s, t.node(pa).needs_grad,
                           [pa](Tape& tp, const Matrix& g) { tp.accumulate(pa, g); });
  return t.wrap(id);
}

Var scale_by(Var m, Var s) {
  Tape& t = tape_of(m, "scale_by");
  if (s.rows() != 1 || s.cols() != 1) {
    throw ShapeError("scale_by: scalar must be 1x1, got " + shape_str(s.value()));
  }
  const int pm = m.id();
  const int ps = s.id();
  const bool ng = t.node(pm).needs_grad || t.node(ps).needs_grad;
  const int id = t.emplace(m.value() * s.value()(0, 0), ng, [pm, ps](Tape& tp, const Matrix& g) {
    if (tp.node(pm).needs_grad) tp.accumulate(pm, g * tp.node(ps).value(0, 0));
    if (tp.node(ps).needs_grad) {
      Matrix ds(1, 1);
      ds(0, 0) = g.cwiseProduct(tp.node(pm).value).sum();
      tp.accumulate(ps, ds);
    }
  });
  return t.wrap(id);
}

Var scale_rows(Var m, Var col) {
  Tape& t = tape_of(m, "scale_rows");
  if (col.cols() != 1 || col.rows() != m.rows()) {
    throw ShapeError("scale_rows: shape mismatch " + shape_str(m.value()) + " vs " +
                     shape_str(col.value()));
  }
  const int pm = m.id();
  const int pc = col.id();
  const bool ng = t.node(pm).needs_grad || t.node(pc).needs_grad;
  const int id = t.emplace(col.value().asDiagonal() * m.value(), ng,
                           [pm, pc](Tape& tp, const Matrix& g) {
                             if (tp.node(pm).needs_grad) {
                               tp.accumulate(pm, tp.node(pc).value.asDiagonal() * g);
                             }
                             if (tp.node(pc).needs_grad) {
                               tp.accumulate(pc, g.cwiseProduct(tp.node(pm).value).rowwise().sum());
                             }
                           });
  return t.wrap(id);
}

Var add_rowvec(Var m, Var row) {
  Tape& t = tape_of(m, "add_rowvec");
  if (row.rows() != 1 || row.cols() != m.cols()) {
    throw ShapeError("add_rowvec: shape mismatch " + shape_str(m.value()) + " vs " +
                     shape_str(row.value()));
  }
  const int pm = m.id();
  const int pr = row.id();
  const bool ng = t.node(pm).needs_grad || t.node(pr).needs_grad;
  const int id = t.emplace(m.value().rowwise() + row.value().row(0), ng,
                           [pm, pr](Tape& tp, const Matrix& g) {
                             tp.accumulate(pm, g);
                             if (tp.node(pr).needs_grad) tp.accumulate(pr, g.colwise().sum());
                           });
  return t.wrap(id);
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  Tape& t = tape_of(parts[0], "concat_cols");
  const Eigen::Index r = parts[0].rows();
  Eigen::Index total = 0;
  bool ng = false;
  for (const Var& p : parts) {
    if (p.rows() != r) {
      throw ShapeError("concat_cols: row mismatch " + shape_str(parts[0].value()) + " vs " +
                       shape_str(p.value()));
    }
    total += p.cols();
    ng = ng || t.node(p.id()).needs_grad;
  }
  Matrix out(r, total);
  std::vector<int> ids;
  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (const Var& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    ids.push_back(p.id());
    offsets.push_back(off);
    off += p.cols();
  }
  const int id = t.emplace(std::move(out), ng, [ids, offsets](Tape& tp, const Matrix& g) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const Eigen::Index w = tp.node(ids[i]).value.cols();
      tp.accumulate(ids[i], g.middleCols(offsets[i], w));
    }
  });
  return t.wrap(id);
}

Var cols(Var a, int start, int count) {
  Tape& t = tape_of(a, "cols");
  if (start < 0 || count < 1 || start + count > a.cols()) {
    throw ShapeError("cols: slice [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") out of " + shape_str(a.value()));
  }
  const int pa = a.id();
  const int id = t.emplace(a.value().middleCols(start, count), t.node(pa).needs_grad,
                           [pa, start, count](Tape& tp, const Matrix& g) {
                             if (!tp.node(pa).needs_grad) return;
                             Matrix d = Matrix::Zero(tp.node(pa).value.rows(),
                                                     tp.node(pa).value.cols());
                             d.middleCols(start, count) = g;
                             tp.accumulate(pa, d);
                           });
  return t.wrap(id);
}

Var rows(Var a, std::vector<int> idx) {
  Tape& t = tape_of(a, "rows");
  const Matrix& av = a.value();
  Matrix out(static_cast<Eigen::Index>(idx.size()), av.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= av.rows()) {
      throw ShapeError("rows: index " + std::to_string(idx[i]) + " out of " + shape_str(av));
    }
    out.row(static_cast<Eigen::Index>(i)) = av.row(idx[i]);
  }
  const int pa = a.id();
  const int id = t.emplace(std::move(out), t.node(pa).needs_grad,
                           [pa, idx = std::move(idx)](Tape& tp, const Matrix& g) {
                             if (!tp.node(pa).needs_grad) return;
                             Matrix d = Matrix::Zero(tp.node(pa).value.rows(),
                                                     tp.node(pa).value.cols());
                             for (std::size_t i = 0; i < idx.size(); ++i) {
                               d.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
                             }
                             tp.accumulate(pa, d);
                           });
  return t.wrap(id);
}

namespace {

// shared scaffolding for elementwise ops; derivative is a function of the input
Var elementwise(Var a, const char* name, std::function<double(double)> fwd,
                std::function<double(double)> dfdx) {
  Tape& t = tape_of(a, name);
  const int pa = a.id();
  Matrix out = a.value().unaryExpr(fwd);
  const int id = t.emplace(std::move(out), t.node(pa).needs_grad,
                           [pa, dfdx = std::move(dfdx)](Tape& tp, const Matrix& g) {
                             if (!tp.node(pa).needs_grad) return;
                             const Matrix& x = tp.node(pa).value;
                             Matrix d(x.rows(), x.cols());
                             for (Eigen::Index i = 0; i < x.size(); ++i) {
                               d(i) = dfdx(x(i)) * g(i);
                             }
                             tp.accumulate(pa, d);
                           });
  return t.wrap(id);
}

}  // namespace

Var tanh_op(Var a) {
  return elementwise(
      a, "tanh", [](double x) { return std::tanh(x); },
      [](double x) {
        const double th = std::tanh(x);
        return 1.0 - th * th;
      });
}

Var sigmoid(Var a) {
  return elementwise(
      a, "sigmoid", [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double x) {
        const double s = 1.0 / (1.0 + std::exp(-x));
        return s * (1.0 - s);
      });
}

Var exp_op(Var a) {
  return elementwise(
      a, "exp", [](double x) { return std::exp(x); },
      [](double x) { return std::exp(x); });
}

Var log_guarded(Var a, double eps) {
  return elementwise(
      a, "log_guarded", [eps](double x) { return std::log(std::abs(x) + eps); },
      [eps](double x) {
        const double sign = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
        return sign / (std::abs(x) + eps);
      });
}

Var abs_op(Var a) {
  return elementwise(
      a, "abs", [](double x) { return std::abs(x); },
      [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var leaky_relu(Var a, double slope) {
  return elementwise(
      a, "leaky_relu", [slope](double x) { return x >= 0.0 ? x : slope * x; },
      [slope](double x) { return x >= 0.0 ? 1.0 : slope; });
}

Var softplus(Var a) {
  return elementwise(
      a, "softplus",
      [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
      [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
}

namespace {

void require_segment_ids(const char* op, const std::vector<int>& seg, int n_segments) {
  for (int s : seg) {
    if (s < 0 || s >= n_segments) {
      throw ShapeError(std::string(op) + ": segment id " + std::to_string(s) +
                       " outside [0, " + std::to_string(n_segments) + ")");
    }
  }
}

}  // namespace

Var segment_softmax(Var logits, std::vector<int> seg, int n_segments) {
  Tape& t = tape_of(logits, "segment_softmax");
  const Matrix& lv = logits.value();
  if (lv.cols() != 1 || static_cast<std::size_t>(lv.rows()) != seg.size()) {
    throw ShapeError("segment_softmax: logits " + shape_str(lv) + " vs " +
                     std::to_string(seg.size()) + " segment ids");
  }
  require_segment_ids("segment_softmax", seg, n_segments);
  std::vector<double> seg_max(static_cast<std::size_t>(n_segments),
                              -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < seg.size(); ++i) {
    seg_max[static_cast<std::size_t>(seg[i])] =
        std::max(seg_max[static_cast<std::size_t>(seg[i])], lv(static_cast<Eigen::Index>(i), 0));
  }
  Matrix out(lv.rows(), 1);
  std::vector<double> seg_sum(static_cast<std::size_t>(n_segments), 0.0);
  for (std::size_t i = 0; i < seg.size(); ++i) {
    out(static_cast<Eigen::Index>(i), 0) =
        std::exp(lv(static_cast<Eigen::Index>(i), 0) - seg_max[static_cast<std::size_t>(seg[i])]);
    seg_sum[static_cast<std::size_t>(seg[i])] += out(static_cast<Eigen::Index>(i), 0);
  }
  for (std::size_t i = 0; i < seg.size(); ++i) {
    out(static_cast<Eigen::Index>(i), 0) /= seg_sum[static_cast<std::size_t>(seg[i])];
  }
  const int pa = logits.id();
  const int self = t.emplace(std::move(out), t.node(pa).needs_grad, nullptr);
  if (t.node(self).needs_grad) {
    // pull needs the node's own output, so it is attached after the id is known
    t.node(self).pull = [pa, self, seg = std::move(seg), n_segments](Tape& tp, const Matrix& g) {
      const Matrix& y = tp.node(self).value;
      std::vector<double> dot(static_cast<std::size_t>(n_segments), 0.0);
      for (Eigen::Index i = 0; i < y.rows(); ++i) {
        dot[static_cast<std::size_t>(seg[static_cast<std::size_t>(i)])] += g(i, 0) * y(i, 0);
      }
      Matrix d(y.rows(), 1);
      for (Eigen::Index i = 0; i < y.rows(); ++i) {
        d(i, 0) = y(i, 0) * (g(i, 0) - dot[static_cast<std::size_t>(seg[static_cast<std::size_t>(i)])]);
      }
      tp.accumulate(pa, d);
    };
  }
  return t.wrap(self);
}

Var segment_sum(Var m, std::vector<int> seg, int n_segments) {
  Tape& t = tape_of(m, "segment_sum");
  const Matrix& mv = m.value();
  if (static_cast<std::size_t>(mv.rows()) != seg.size()) {
    throw ShapeError("segment_sum: " + shape_str(mv) + " vs " + std::to_string(seg.size()) +
                     " segment ids");
  }
  require_segment_ids("segment_sum", seg, n_segments);
  Matrix out = Matrix::Zero(n_segments, mv.cols());
  for (std::size_t i = 0; i < seg.size(); ++i) {
    out.row(seg[i]) += mv.row(static_cast<Eigen::Index>(i));
  }
  const int pa = m.id();
  const int id = t.emplace(std::move(out), t.node(pa).needs_grad,
                           [pa, seg = std::move(seg)](Tape& tp, const Matrix& g) {
                             if (!tp.node(pa).needs_grad) return;
                             const Matrix& x = tp.node(pa).value;
                             Matrix d(x.rows(), x.cols());
                             for (std::size_t i = 0; i < seg.size(); ++i) {
                               d.row(static_cast<Eigen::Index>(i)) = g.row(seg[i]);
                             }
                             tp.accumulate(pa, d);
                           });
  return t.wrap(id);
}

Var segment_mean(Var m, std::vector<int> seg, int n_segments) {
  Tape& t = tape_of(m, "segment_mean");
  const Matrix& mv = m.value();
  if (static_cast<std::size_t>(mv.rows()) != seg.size()) {
    throw ShapeError("segment_mean: " + shape_str(mv) + " vs " + std::to_string(seg.size()) +
                     " segment ids");
  }
  require_segment_ids("segment_mean", seg, n_segments);
  std::vector<double> counts(static_cast<std::size_t>(n_segments), 0.0);
  for (int s : seg) counts[static_cast<std::size_t>(s)] += 1.0;
  Matrix out = Matrix::Zero(n_segments, mv.cols());
  for (std::size_t i = 0; i < seg.size(); ++i) {
    out.row(seg[i]) += mv.row(static_cast<Eigen::Index>(i)) / counts[static_cast<std::size_t>(seg[i])];
  }
  const int pa = m.id();
  const int id = t.emplace(std::move(out), t.node(pa).needs_grad,
                           [pa, seg = std::move(seg), counts](Tape& tp, const Matrix& g) {
                             if (!tp.node(pa).needs_grad) return;
                             const Matrix& x = tp.node(pa).value;
                             Matrix d(x.rows(), x.cols());
                             for (std::size_t i = 0; i < seg.size(); ++i) {
                               d.row(static_cast<Eigen::Index>(i)) =
                                   g.row(seg[i]) / counts[static_cast<std::size_t>(seg[i])];
                             }
                             tp.accumulate(pa, d);
                           });
  return t.wrap(id);
}

Var reduce_sum(Var a) {
  Tape& t = tape_of(a, "reduce_sum");
  const int pa = a.id();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  const int id = t.emplace(std::move(out), t.node(pa).needs_grad,
                           [pa](Tape& tp, const Matrix& g) {
                             if (!tp.node(pa).needs_grad) return;
                             const Matrix& x = tp.node(pa).value;
                             tp.accumulate(pa, Matrix::Constant(x.rows(), x.cols(), g(0, 0)));
                           });
  return t.wrap(id);
}

Var reduce_mean(Var a) {
  Tape& t = tape_of(a, "reduce_mean");
  const int pa = a.id();
  const double inv = 1.0 / static_cast<double>(a.value().size());
  Matrix out(1, 1);
  out(0, 0) = a.value().sum() * inv;
  const int id = t.emplace(std::move(out), t.node(pa).needs_grad,
                           [pa, inv](Tape& tp, const Matrix& g) {
                             if (!tp.node(pa).needs_grad) return;
                             const Matrix& x = tp.node(pa).value;
                             tp.accumulate(pa, Matrix::Constant(x.rows(), x.cols(), g(0, 0) * inv));
                           });
  return t.wrap(id);
}

// ---------------------------------------------------------------------------
// checkpoint I/O

std::string config_hash(const nlohmann::json& config) {
  const std::string dump = config.dump();
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

void save_checkpoint(const ParamStore& store, const nlohmann::json& config,
                     const std::string& path) {
  nlohmann::json out;
  out["format_version"] = 1;
  out["config"] = config;
  out["config_hash"] = config_hash(config);
  nlohmann::json params = nlohmann::json::array();
  for (const auto& [name, p] : store.entries()) {
    nlohmann::json entry;
    entry["name"] = name;
    entry["shape"] = {p.value.rows(), p.value.cols()};
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(p.value.size()));
    for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
      for (Eigen::Index c = 0; c < p.value.cols(); ++c) values.push_back(p.value(r, c));
    }
    entry["values"] = std::move(values);
    params.push_back(std::move(entry));
  }
  out["params"] = std::move(params);
  std::ofstream f(path);
  if (!f) throw ParseError("cannot open checkpoint file for writing: " + path);
  f << out.dump() << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open checkpoint file: " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint JSON: ") + e.what());
  }
  Checkpoint ck;
  try {
    ck.config = j.at("config");
    ck.hash = j.at("config_hash").get<std::string>();
    if (ck.hash != config_hash(ck.config)) {
      throw ConfigMismatchError("checkpoint config_hash does not match embedded config");
    }
    for (const auto& entry : j.at("params")) {
      const std::string name = entry.at("name").get<std::string>();
      const auto shape = entry.at("shape");
      const Eigen::Index rows = shape.at(0).get<Eigen::Index>();
      const Eigen::Index cols = shape.at(1).get<Eigen::Index>();
      const auto values = entry.at("values").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(values.size()) != rows * cols) {
        throw ParseError("checkpoint parameter " + name + " has wrong value count");
      }
      Matrix m(rows, cols);
      std::size_t i = 0;
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = values[i++];
      }
      ck.params.add(name, std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint JSON: ") + e.what());
  }
  return ck;
}

}  // namespace netlat::tensor
