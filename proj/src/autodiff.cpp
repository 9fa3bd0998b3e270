#include "dpcc/autodiff.hpp"

#include <cmath>
#include <unordered_set>

namespace dpcc::nn {

namespace {

thread_local bool g_grad_enabled = true;

void ensure_grad(Node* n) {
  if (n->grad.size() == 0) n->grad = Mat::Zero(n->value.rows(), n->value.cols());
}

void accum(Node* n, const Mat& g) {
  if (!n->requires_grad) return;
  ensure_grad(n);
  n->grad += g;
}

enum class Bcast { same, scalar, row, col };

Bcast bcast_kind(const Mat& a, const Mat& b) {
  if (b.rows() == a.rows() && b.cols() == a.cols()) return Bcast::same;
  if (b.rows() == 1 && b.cols() == 1) return Bcast::scalar;
  if (b.rows() == 1 && b.cols() == a.cols()) return Bcast::row;
  if (b.cols() == 1 && b.rows() == a.rows()) return Bcast::col;
  fail(ErrorKind::numeric, "elementwise op: shapes (" + std::to_string(a.rows()) + "x" +
                               std::to_string(a.cols()) + ") vs (" + std::to_string(b.rows()) +
                               "x" + std::to_string(b.cols()) + ") not broadcastable");
}

Mat expand(const Mat& b, Bcast k, Eigen::Index rows, Eigen::Index cols) {
  switch (k) {
    case Bcast::same: return b;
    case Bcast::scalar: return Mat::Constant(rows, cols, b(0, 0));
    case Bcast::row: return b.replicate(rows, 1);
    case Bcast::col: return b.replicate(1, cols);
  }
  return b;
}

/// Fold a full-size gradient back to the broadcast operand's shape.
Mat reduce(const Mat& g, Bcast k) {
  switch (k) {
    case Bcast::same: return g;
    case Bcast::scalar: {
      Mat r(1, 1);
      r(0, 0) = g.sum();
      return r;
    }
    case Bcast::row: return g.colwise().sum();
    case Bcast::col: return g.rowwise().sum();
  }
  return g;
}

Var result(Mat value, std::initializer_list<Var> parents,
           std::function<void(const Mat&)> backprop) {
  auto out = std::make_shared<Node>(std::move(value));
  if (!g_grad_enabled) return out;
  bool need = false;
  for (const auto& p : parents)
    if (p->requires_grad) need = true;
  if (!need) return out;
  out->requires_grad = true;
  out->parents = parents;
  out->backprop = std::move(backprop);
  return out;
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

Var constant(Mat v) { return std::make_shared<Node>(std::move(v)); }

Var make_param(Mat v) { return std::make_shared<Node>(std::move(v), true); }

void backward(const Var& loss) {
  require(loss->value.size() == 1, ErrorKind::numeric, "backward: loss must be a 1x1 scalar");
  require(loss->requires_grad, ErrorKind::numeric,
          "backward: loss does not depend on any parameter");

  // iterative post-order over the requires_grad subgraph; reversed, it is a
  // topological order in which every consumer precedes its producers
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  struct Frame {
    Node* n;
    size_t next;
  };
  std::vector<Frame> stack{{loss.get(), 0}};
  visited.insert(loss.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.n->parents.size()) {
      Node* p = f.n->parents[f.next++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.n);
      stack.pop_back();
    }
  }

  loss->grad = Mat::Ones(1, 1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop && n->grad.size() != 0) n->backprop(n->grad);
  }
}

Var add(const Var& a, const Var& b) {
  Bcast k = bcast_kind(a->value, b->value);
  Mat v = a->value + expand(b->value, k, a->value.rows(), a->value.cols());
  Node *ap = a.get(), *bp = b.get();
  return result(std::move(v), {a, b}, [ap, bp, k](const Mat& g) {
    accum(ap, g);
    if (bp->requires_grad) accum(bp, reduce(g, k));
  });
}

Var sub(const Var& a, const Var& b) {
  Bcast k = bcast_kind(a->value, b->value);
  Mat v = a->value - expand(b->value, k, a->value.rows(), a->value.cols());
  Node *ap = a.get(), *bp = b.get();
  return result(std::move(v), {a, b}, [ap, bp, k](const Mat& g) {
    accum(ap, g);
    if (bp->requires_grad) accum(bp, Mat(-reduce(g, k)));
  });
}

Var mul(const Var& a, const Var& b) {
  Bcast k = bcast_kind(a->value, b->value);
  Mat bx = expand(b->value, k, a->value.rows(), a->value.cols());
  Mat v = a->value.cwiseProduct(bx);
  Node *ap = a.get(), *bp = b.get();
  Mat av = a->value;
  return result(std::move(v), {a, b}, [ap, bp, k, bx, av](const Mat& g) {
    if (ap->requires_grad) accum(ap, g.cwiseProduct(bx));
    if (bp->requires_grad) accum(bp, reduce(g.cwiseProduct(av), k));
  });
}

Var div(const Var& a, const Var& b) {
  Bcast k = bcast_kind(a->value, b->value);
  Mat bx = expand(b->value, k, a->value.rows(), a->value.cols());
  Mat v = a->value.cwiseQuotient(bx);
  Node *ap = a.get(), *bp = b.get();
  Mat av = a->value;
  return result(std::move(v), {a, b}, [ap, bp, k, bx, av](const Mat& g) {
    if (ap->requires_grad) accum(ap, g.cwiseQuotient(bx));
    if (bp->requires_grad)
      accum(bp, reduce(Mat(-g.cwiseProduct(av).cwiseQuotient(bx.cwiseProduct(bx))), k));
  });
}

Var matmul(const Var& a, const Var& b) {
  require(a->value.cols() == b->value.rows(), ErrorKind::numeric,
          "matmul: inner dimensions disagree");
  Mat v = a->value * b->value;
  Node *ap = a.get(), *bp = b.get();
  Mat av = a->value, bv = b->value;
  return result(std::move(v), {a, b}, [ap, bp, av, bv](const Mat& g) {
    if (ap->requires_grad) accum(ap, g * bv.transpose());
    if (bp->requires_grad) accum(bp, av.transpose() * g);
  });
}

Var transpose(const Var& a) {
  Mat v = a->value.transpose();
  Node* ap = a.get();
  return result(std::move(v), {a}, [ap](const Mat& g) { accum(ap, g.transpose()); });
}

Var neg(const Var& a) {
  Node* ap = a.get();
  return result(Mat(-a->value), {a}, [ap](const Mat& g) { accum(ap, Mat(-g)); });
}

Var add_scalar(const Var& a, double s) {
  Node* ap = a.get();
  return result(Mat(a->value.array() + s), {a}, [ap](const Mat& g) { accum(ap, g); });
}

Var mul_scalar(const Var& a, double s) {
  Node* ap = a.get();
  return result(Mat(a->value * s), {a},
                [ap, s](const Mat& g) { accum(ap, Mat(g * s)); });
}

Var silu(const Var& a) {
  Mat sg = (1.0 / (1.0 + (-a->value.array()).exp())).matrix();
  Mat v = a->value.cwiseProduct(sg);
  Mat d = (sg.array() * (1.0 + a->value.array() * (1.0 - sg.array()))).matrix();
  Node* ap = a.get();
  return result(std::move(v), {a},
                [ap, d](const Mat& g) { accum(ap, g.cwiseProduct(d)); });
}

Var sigmoid(const Var& a) {
  Mat y = (1.0 / (1.0 + (-a->value.array()).exp())).matrix();
  Mat d = (y.array() * (1.0 - y.array())).matrix();
  Node* ap = a.get();
  return result(std::move(y), {a},
                [ap, d](const Mat& g) { accum(ap, g.cwiseProduct(d)); });
}

Var tanh(const Var& a) {
  Mat y = a->value.array().tanh().matrix();
  Mat d = (1.0 - y.array().square()).matrix();
  Node* ap = a.get();
  return result(std::move(y), {a},
                [ap, d](const Mat& g) { accum(ap, g.cwiseProduct(d)); });
}

Var softplus(const Var& a) {
  // log(1 + e^x), computed as max(x,0) + log1p(e^{-|x|}) for stability
  Mat y = a->value.unaryExpr(
      [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); });
  Mat d = (1.0 / (1.0 + (-a->value.array()).exp())).matrix();
  Node* ap = a.get();
  return result(std::move(y), {a},
                [ap, d](const Mat& g) { accum(ap, g.cwiseProduct(d)); });
}

Var exp(const Var& a) {
  Mat y = a->value.array().exp().matrix();
  Node* ap = a.get();
  Mat d = y;
  return result(std::move(y), {a},
                [ap, d](const Mat& g) { accum(ap, g.cwiseProduct(d)); });
}

Var log(const Var& a) {
  Mat y = a->value.array().log().matrix();
  Mat d = a->value.cwiseInverse();
  Node* ap = a.get();
  return result(std::move(y), {a},
                [ap, d](const Mat& g) { accum(ap, g.cwiseProduct(d)); });
}

Var erf(const Var& a) {
  Mat y = a->value.unaryExpr([](double x) { return std::erf(x); });
  const double c = 2.0 / std::sqrt(M_PI);
  Mat d = (c * (-a->value.array().square()).exp()).matrix();
  Node* ap = a.get();
  return result(std::move(y), {a},
                [ap, d](const Mat& g) { accum(ap, g.cwiseProduct(d)); });
}

Var square(const Var& a) {
  Mat y = a->value.array().square().matrix();
  Mat d = 2.0 * a->value;
  Node* ap = a.get();
  return result(std::move(y), {a},
                [ap, d](const Mat& g) { accum(ap, g.cwiseProduct(d)); });
}

Var clamp_min(const Var& a, double lo) {
  Mat y = a->value.cwiseMax(lo);
  Mat d = (a->value.array() > lo).cast<double>().matrix();
  Node* ap = a.get();
  return result(std::move(y), {a},
                [ap, d](const Mat& g) { accum(ap, g.cwiseProduct(d)); });
}

Var sum_all(const Var& a) {
  Mat v(1, 1);
  v(0, 0) = a->value.sum();
  Node* ap = a.get();
  Eigen::Index r = a->value.rows(), c = a->value.cols();
  return result(std::move(v), {a}, [ap, r, c](const Mat& g) {
    accum(ap, Mat(Mat::Constant(r, c, g(0, 0))));
  });
}

Var mean_all(const Var& a) {
  Mat v(1, 1);
  v(0, 0) = a->value.mean();
  Node* ap = a.get();
  Eigen::Index r = a->value.rows(), c = a->value.cols();
  double inv = 1.0 / static_cast<double>(r * c);
  return result(std::move(v), {a}, [ap, r, c, inv](const Mat& g) {
    accum(ap, Mat(Mat::Constant(r, c, g(0, 0) * inv)));
  });
}

Var mean_rows(const Var& a) {
  Mat v = a->value.colwise().mean();
  Node* ap = a.get();
  Eigen::Index r = a->value.rows();
  return result(std::move(v), {a}, [ap, r](const Mat& g) {
    accum(ap, Mat(g.replicate(r, 1) / static_cast<double>(r)));
  });
}

Var row_sum(const Var& a) {
  Mat v = a->value.rowwise().sum();
  Node* ap = a.get();
  Eigen::Index c = a->value.cols();
  return result(std::move(v), {a},
                [ap, c](const Mat& g) { accum(ap, Mat(g.replicate(1, c))); });
}

Var group_max(const Var& a, int n_groups) {
  const Eigen::Index rows = a->value.rows(), cols = a->value.cols();
  require(n_groups >= 1 && rows % n_groups == 0, ErrorKind::numeric,
          "group_max: row count not divisible by group count");
  const Eigen::Index k = rows / n_groups;

  Mat v(n_groups, cols);
  IMat arg(n_groups, cols);
  for (int g = 0; g < n_groups; ++g) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      double best = a->value(g * k, c);
      Eigen::Index bi = g * k;
      for (Eigen::Index r = g * k + 1; r < (g + 1) * k; ++r) {
        if (a->value(r, c) > best) {
          best = a->value(r, c);
          bi = r;
        }
      }
      v(g, c) = best;
      arg(g, c) = static_cast<int>(bi);
    }
  }
  Node* ap = a.get();
  return result(std::move(v), {a}, [ap, arg, rows, cols](const Mat& g) {
    Mat dx = Mat::Zero(rows, cols);
    for (Eigen::Index i = 0; i < arg.rows(); ++i)
      for (Eigen::Index c = 0; c < cols; ++c) dx(arg(i, c), c) += g(i, c);
    accum(ap, dx);
  });
}

Var gather_rows(const Var& a, const std::vector<int>& idx) {
  const Eigen::Index cols = a->value.cols();
  Mat v(static_cast<Eigen::Index>(idx.size()), cols);
  for (size_t i = 0; i < idx.size(); ++i) {
    require(idx[i] >= 0 && idx[i] < a->value.rows(), ErrorKind::numeric,
            "gather_rows: index out of range");
    v.row(static_cast<Eigen::Index>(i)) = a->value.row(idx[i]);
  }
  Node* ap = a.get();
  Eigen::Index rows = a->value.rows();
  return result(std::move(v), {a}, [ap, idx, rows, cols](const Mat& g) {
    Mat dx = Mat::Zero(rows, cols);
    for (size_t i = 0; i < idx.size(); ++i)
      dx.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
    accum(ap, dx);
  });
}

Var concat_cols(const Var& a, const Var& b) {
  require(a->value.rows() == b->value.rows(), ErrorKind::numeric,
          "concat_cols: row counts disagree");
  Mat v(a->value.rows(), a->value.cols() + b->value.cols());
  v.leftCols(a->value.cols()) = a->value;
  v.rightCols(b->value.cols()) = b->value;
  Node *ap = a.get(), *bp = b.get();
  Eigen::Index ca = a->value.cols(), cb = b->value.cols();
  return result(std::move(v), {a, b}, [ap, bp, ca, cb](const Mat& g) {
    if (ap->requires_grad) accum(ap, g.leftCols(ca));
    if (bp->requires_grad) accum(bp, g.rightCols(cb));
  });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index len) {
  require(start >= 0 && len >= 1 && start + len <= a->value.cols(), ErrorKind::numeric,
          "slice_cols: range out of bounds");
  Mat v = a->value.middleCols(start, len);
  Node* ap = a.get();
  return result(std::move(v), {a}, [ap, start, len](const Mat& g) {
    if (!ap->requires_grad) return;
    ensure_grad(ap);
    ap->grad.middleCols(start, len) += g;
  });
}

Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols) {
  require(rows >= 1 && cols >= 1 && rows * cols == a->value.size(), ErrorKind::numeric,
          "reshape: element count mismatch");
  // row-major storage makes this a flat copy
  Mat v = Eigen::Map<const Mat>(a->value.data(), rows, cols);
  Node* ap = a.get();
  const Eigen::Index ar = a->value.rows(), ac = a->value.cols();
  return result(std::move(v), {a}, [ap, ar, ac](const Mat& g) {
    if (!ap->requires_grad) return;
    ensure_grad(ap);
    ap->grad += Eigen::Map<const Mat>(g.data(), ar, ac);
  });
}

Var layer_norm(const Var& a, double eps) {
  const Eigen::Index rows = a->value.rows(), cols = a->value.cols();
  Mat y(rows, cols);
  Mat inv_std(rows, 1);
  for (Eigen::Index i = 0; i < rows; ++i) {
    double mu = a->value.row(i).mean();
    double var = (a->value.row(i).array() - mu).square().mean();
    double is = 1.0 / std::sqrt(var + eps);
    inv_std(i, 0) = is;
    y.row(i) = ((a->value.row(i).array() - mu) * is).matrix();
  }
  Node* ap = a.get();
  Mat ycopy = y;
  return result(std::move(y), {a}, [ap, ycopy, inv_std, cols](const Mat& g) {
    Mat dx(g.rows(), g.cols());
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      double gmean = g.row(i).mean();
      double gydot = g.row(i).cwiseProduct(ycopy.row(i)).mean();
      dx.row(i) =
          ((g.row(i).array() - gmean - ycopy.row(i).array() * gydot) * inv_std(i, 0)).matrix();
    }
    (void)cols;
    accum(ap, dx);
  });
}

Var softmax_rows(const Var& a) {
  Mat y(a->value.rows(), a->value.cols());
  for (Eigen::Index i = 0; i < a->value.rows(); ++i) {
    Eigen::ArrayXd e = (a->value.row(i).array() - a->value.row(i).maxCoeff()).exp();
    y.row(i) = (e / e.sum()).matrix();
  }
  Node* ap = a.get();
  Mat ycopy = y;
  return result(std::move(y), {a}, [ap, ycopy](const Mat& g) {
    Mat dx(g.rows(), g.cols());
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      double dot = g.row(i).cwiseProduct(ycopy.row(i)).sum();
      dx.row(i) = ycopy.row(i).cwiseProduct(g.row(i) - Mat::Constant(1, g.cols(), dot));
    }
    accum(ap, dx);
  });
}

Var linear(const Var& x, const Var& W, const Var& b) { return add(matmul(x, W), b); }

Var chamfer(const Var& a, const Var& b) {
  const Eigen::Index n = a->value.rows(), m = b->value.rows();
  require(n >= 1 && m >= 1, ErrorKind::numeric, "chamfer: empty point set");
  require(a->value.cols() == b->value.cols(), ErrorKind::numeric, "chamfer: dim mismatch");

  auto nearest = [](const Mat& q, const Mat& ref) {
    std::vector<Eigen::Index> idx(q.rows());
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < ref.rows(); ++j) {
        double d = (q.row(i) - ref.row(j)).squaredNorm();
        if (d < best) {
          best = d;
          idx[i] = j;
        }
      }
    }
    return idx;
  };

  std::vector<Eigen::Index> ab = nearest(a->value, b->value);
  std::vector<Eigen::Index> ba = nearest(b->value, a->value);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    total += (a->value.row(i) - b->value.row(ab[i])).squaredNorm() / static_cast<double>(n);
  for (Eigen::Index j = 0; j < m; ++j)
    total += (b->value.row(j) - a->value.row(ba[j])).squaredNorm() / static_cast<double>(m);

  Node* ap = a.get();
  Node* bp = b.get();
  Mat av = a->value, bv = b->value;
  return result(Mat::Constant(1, 1, total), {a, b},
                [ap, bp, av, bv, ab, ba, n, m](const Mat& g) {
                  const double s = g(0, 0);
                  if (ap->requires_grad) {
                    ensure_grad(ap);
                    for (Eigen::Index i = 0; i < n; ++i)
                      ap->grad.row(i) += s * 2.0 / n * (av.row(i) - bv.row(ab[i]));
                    for (Eigen::Index j = 0; j < m; ++j)
                      ap->grad.row(ba[j]) -= s * 2.0 / m * (bv.row(j) - av.row(ba[j]));
                  }
                  if (bp->requires_grad) {
                    ensure_grad(bp);
                    for (Eigen::Index j = 0; j < m; ++j)
                      bp->grad.row(j) += s * 2.0 / m * (bv.row(j) - av.row(ba[j]));
                    for (Eigen::Index i = 0; i < n; ++i)
                      bp->grad.row(ab[i]) -= s * 2.0 / n * (av.row(i) - bv.row(ab[i]));
                  }
                });
}

Var ParameterStore::create(const std::string& name, Mat init) {
  require(!has(name), ErrorKind::config, "duplicate parameter name: " + name);
  Var v = make_param(std::move(init));
  entries_.emplace_back(name, v);
  return v;
}

Var ParameterStore::get(const std::string& name) const {
  for (const auto& [n, v] : entries_)
    if (n == name) return v;
  fail(ErrorKind::config, "unknown parameter: " + name);
}

bool ParameterStore::has(const std::string& name) const {
  for (const auto& [n, v] : entries_)
    if (n == name) return true;
  return false;
}

Eigen::Index ParameterStore::total_size() const {
  Eigen::Index n = 0;
  for (const auto& [name, v] : entries_) n += v->value.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& [name, v] : entries_) v->grad.resize(0, 0);
}

Adam::Adam(ParameterStore& params, double lr, double beta1, double beta2, double eps)
    : params_(params), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& [name, v] : params_.entries()) {
    m_.push_back(Mat::Zero(v->value.rows(), v->value.cols()));
    v_.push_back(Mat::Zero(v->value.rows(), v->value.cols()));
  }
}

void Adam::step() {
  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const auto& entries = params_.entries();
  require(entries.size() == m_.size(), ErrorKind::config,
          "optimizer state does not match parameter store");
  for (size_t i = 0; i < entries.size(); ++i) {
    Node* p = entries[i].second.get();
    Mat g = p->grad.size() != 0 ? p->grad : Mat::Zero(p->value.rows(), p->value.cols());
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
    Mat mhat = m_[i] / bc1;
    Mat vhat = v_[i] / bc2;
    p->value -= lr_ * mhat.cwiseQuotient((vhat.cwiseSqrt().array() + eps_).matrix());
  }
}

Mat glorot(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
  double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return rng.uniform_mat(fan_in, fan_out, -limit, limit);
}

}  // namespace dpcc::nn
