#include "tfc/autodiff.hpp"

#include <algorithm>
#include <unordered_set>

#include "tfc/errors.hpp"

namespace tfc::ad {

// ---------------------------------------------------------------- ParamStore

Parameter& ParamStore::add(std::string name, NumArray init) {
  if (index_.contains(name)) throw ContractError("duplicate parameter name: " + name);
  index_.emplace(name, params_.size());
  NumArray grad(init.shape());
  params_.push_back(Parameter{std::move(name), std::move(init), std::move(grad)});
  return params_.back();
}

Parameter& ParamStore::at(std::string_view name) {
  const auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ContractError("unknown parameter: " + std::string(name));
  return params_[it->second];
}

const Parameter& ParamStore::at(std::string_view name) const {
  return const_cast<ParamStore*>(this)->at(name);
}

bool ParamStore::contains(std::string_view name) const {
  return index_.contains(std::string(name));
}

std::size_t ParamStore::total_values() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParamStore::zero_grads() {
  for (auto& p : params_) p.grad.fill(0.0);
}

void zero_grads(ParamStore& store) { store.zero_grads(); }

// ------------------------------------------------------------------- helpers

namespace {

void require_rank(const NumArray& a, std::size_t rank, const char* op) {
  if (a.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) +
                     ", got shape " + shape_to_string(a.shape()));
  }
}

void accumulate(NumArray& dst, const NumArray& src) {
  double* d = dst.ptr();
  const double* s = src.ptr();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

NumArray transpose2d(const double* src, std::size_t rows, std::size_t cols) {
  NumArray out(Shape{cols, rows});
  double* o = out.ptr();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) o[c * rows + r] = src[r * cols + c];
  }
  return out;
}

}  // namespace

void gemm_accumulate(std::size_t m, std::size_t k, std::size_t n, const double* a,
                     const double* b, double* c) {
  std::vector<double> scratch(n * 4, 0.0);
  for (std::size_t i0 = 0; i0 < m; i0 += 4) {
    const std::size_t rows = std::min<std::size_t>(4, m - i0);
    double* __restrict c0 = c + i0 * n;
    double* __restrict c1 = rows > 1 ? c0 + n : scratch.data() + n;
    double* __restrict c2 = rows > 2 ? c0 + 2 * n : scratch.data() + 2 * n;
    double* __restrict c3 = rows > 3 ? c0 + 3 * n : scratch.data() + 3 * n;
    const double* a0 = a + i0 * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double x0 = a0[p];
      const double x1 = rows > 1 ? a0[k + p] : 0.0;
      const double x2 = rows > 2 ? a0[2 * k + p] : 0.0;
      const double x3 = rows > 3 ? a0[3 * k + p] : 0.0;
      if (x0 == 0.0 && x1 == 0.0 && x2 == 0.0 && x3 == 0.0) continue;
      const double* __restrict br = b + p * n;
      for (std::size_t j = 0; j < n; ++j) {
        const double w = br[j];
        c0[j] += x0 * w;
        c1[j] += x1 * w;
        c2[j] += x2 * w;
        c3[j] += x3 * w;
      }
    }
  }
}

// --------------------------------------------------------------------- nodes

Var constant(NumArray value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = OpTag::constant;
  return node;
}

Var parameter(Parameter& param) {
  auto node = std::make_shared<Node>();
  node->value = param.value;
  node->op = OpTag::parameter;
  node->requires_grad = true;
  node->param = &param;
  return node;
}

Var make_op(NumArray value, std::vector<Var> parents, OpTag op,
            std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = std::any_of(parents.begin(), parents.end(),
                                    [](const Var& p) { return p->requires_grad; });
  node->parents = std::move(parents);
  node->op = op;
  if (node->requires_grad) node->backward_fn = std::move(backward_fn);
  return node;
}

// -------------------------------------------------------------------- conv1d

Var conv1d(const Var& input, const Var& weight, const Var& bias, std::size_t stride,
           std::size_t padding) {
  const NumArray& x = input->value;
  const NumArray& w = weight->value;
  require_rank(x, 3, "conv1d input");
  require_rank(w, 3, "conv1d weight");
  require_rank(bias->value, 1, "conv1d bias");
  if (stride == 0) throw ShapeError("conv1d: stride must be >= 1");
  const std::size_t batch = x.dim(0), len = x.dim(1), cin = x.dim(2);
  const std::size_t kernel = w.dim(0), cout = w.dim(2);
  if (w.dim(1) != cin) {
    throw ShapeError("conv1d: input has " + std::to_string(cin) +
                     " channels, weight expects " + std::to_string(w.dim(1)));
  }
  if (bias->value.size() != cout) throw ShapeError("conv1d: bias size mismatch");
  const std::size_t padded = std::max(len + 2 * padding, kernel);
  const std::size_t lout = (padded - kernel) / stride + 1;

  NumArray out(Shape{batch, lout, cout});
  const std::vector<double> zeros(cin, 0.0);
  std::vector<double> scratch(3 * cout);
  const double* xp = x.ptr();
  const double* wp = w.ptr();
  const double* bp = bias->value.ptr();

  // Row pointer for output position t and tap k, or the zero row for padding.
  auto row = [&](std::size_t b, std::size_t t, std::size_t k) -> const double* {
    const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t * stride + k) -
                               static_cast<std::ptrdiff_t>(padding);
    if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(len)) return zeros.data();
    return xp + (b * len + static_cast<std::size_t>(pos)) * cin;
  };

  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t0 = 0; t0 < lout; t0 += 4) {
      const std::size_t nt = std::min<std::size_t>(4, lout - t0);
      double* acc[4];
      for (std::size_t j = 0; j < 4; ++j) {
        acc[j] = j < nt ? out.ptr() + (b * lout + t0 + j) * cout
                        : scratch.data() + (j - 1) * cout;
        std::copy(bp, bp + cout, acc[j]);
      }
      double* __restrict a0 = acc[0];
      double* __restrict a1 = acc[1];
      double* __restrict a2 = acc[2];
      double* __restrict a3 = acc[3];
      for (std::size_t k = 0; k < kernel; ++k) {
        const double* r0 = row(b, t0, k);
        const double* r1 = nt > 1 ? row(b, t0 + 1, k) : zeros.data();
        const double* r2 = nt > 2 ? row(b, t0 + 2, k) : zeros.data();
        const double* r3 = nt > 3 ? row(b, t0 + 3, k) : zeros.data();
        for (std::size_t c = 0; c < cin; ++c) {
          const double x0 = r0[c], x1 = r1[c], x2 = r2[c], x3 = r3[c];
          if (x0 == 0.0 && x1 == 0.0 && x2 == 0.0 && x3 == 0.0) continue;
          const double* __restrict wr = wp + (k * cin + c) * cout;
          for (std::size_t o = 0; o < cout; ++o) {
            const double wv = wr[o];
            a0[o] += x0 * wv;
            a1[o] += x1 * wv;
            a2[o] += x2 * wv;
            a3[o] += x3 * wv;
          }
        }
      }
    }
  }

  return make_op(std::move(out), {input, weight, bias}, OpTag::conv1d,
                 [=](Node& self) {
    const Var& in = self.parents[0];
    const Var& wt = self.parents[1];
    const Var& bs = self.parents[2];
    const double* g = self.grad.ptr();
    const double* xv = in->value.ptr();
    const std::vector<double> zero_row(std::max(cin, cout), 0.0);
    auto in_row = [&](std::size_t b, std::size_t t, std::size_t k) -> const double* {
      const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t * stride + k) -
                                 static_cast<std::ptrdiff_t>(padding);
      if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(len)) return zero_row.data();
      return xv + (b * len + static_cast<std::size_t>(pos)) * cin;
    };

    if (bs->requires_grad) {
      double* db = bs->grad.ptr();
      for (std::size_t r = 0; r < batch * lout; ++r) {
        const double* gr = g + r * cout;
        for (std::size_t o = 0; o < cout; ++o) db[o] += gr[o];
      }
    }
    if (wt->requires_grad) {
      double* dw = wt->grad.ptr();
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t t0 = 0; t0 < lout; t0 += 4) {
          const std::size_t nt = std::min<std::size_t>(4, lout - t0);
          const double* __restrict g0 = g + (b * lout + t0) * cout;
          const double* __restrict g1 = nt > 1 ? g0 + cout : zero_row.data();
          const double* __restrict g2 = nt > 2 ? g0 + 2 * cout : zero_row.data();
          const double* __restrict g3 = nt > 3 ? g0 + 3 * cout : zero_row.data();
          for (std::size_t k = 0; k < kernel; ++k) {
            const double* r0 = in_row(b, t0, k);
            const double* r1 = nt > 1 ? in_row(b, t0 + 1, k) : zero_row.data();
            const double* r2 = nt > 2 ? in_row(b, t0 + 2, k) : zero_row.data();
            const double* r3 = nt > 3 ? in_row(b, t0 + 3, k) : zero_row.data();
            for (std::size_t c = 0; c < cin; ++c) {
              const double x0 = r0[c], x1 = r1[c], x2 = r2[c], x3 = r3[c];
              if (x0 == 0.0 && x1 == 0.0 && x2 == 0.0 && x3 == 0.0) continue;
              double* __restrict dr = dw + (k * cin + c) * cout;
              for (std::size_t o = 0; o < cout; ++o) {
                dr[o] += x0 * g0[o] + x1 * g1[o] + x2 * g2[o] + x3 * g3[o];
              }
            }
          }
        }
      }
    }
    if (in->requires_grad) {
      // wt_t[k][o][c] so the inner loop runs over input channels.
      NumArray wt_t(Shape{kernel, cout, cin});
      const double* wv = wt->value.ptr();
      for (std::size_t k = 0; k < kernel; ++k) {
        for (std::size_t c = 0; c < cin; ++c) {
          for (std::size_t o = 0; o < cout; ++o) {
            wt_t[(k * cout + o) * cin + c] = wv[(k * cin + c) * cout + o];
          }
        }
      }
      double* dx = in->grad.ptr();
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t t = 0; t < lout; ++t) {
          const double* gr = g + (b * lout + t) * cout;
          for (std::size_t k = 0; k < kernel; ++k) {
            const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t * stride + k) -
                                       static_cast<std::ptrdiff_t>(padding);
            if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(len)) continue;
            double* __restrict dr = dx + (b * len + static_cast<std::size_t>(pos)) * cin;
            for (std::size_t o = 0; o < cout; ++o) {
              const double gv = gr[o];
              if (gv == 0.0) continue;
              const double* __restrict wr = wt_t.ptr() + (k * cout + o) * cin;
              for (std::size_t c = 0; c < cin; ++c) dr[c] += gv * wr[c];
            }
          }
        }
      }
    }
  });
}

// ----------------------------------------------------------------- maxpool1d

Var maxpool1d(const Var& input, std::size_t kernel, std::size_t stride) {
  const NumArray& x = input->value;
  require_rank(x, 3, "maxpool1d input");
  if (kernel == 0 || stride == 0) throw ShapeError("maxpool1d: kernel and stride must be >= 1");
  const std::size_t batch = x.dim(0), len = x.dim(1), ch = x.dim(2);
  if (kernel > len) {
    throw ShapeError("maxpool1d: window " + std::to_string(kernel) +
                     " larger than input length " + std::to_string(len));
  }
  const std::size_t lout = (len - kernel) / stride + 1;
  NumArray out(Shape{batch, lout, ch});
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < lout; ++t) {
      const std::size_t start = (b * len + t * stride) * ch;
      const std::size_t o = (b * lout + t) * ch;
      for (std::size_t c = 0; c < ch; ++c) {
        std::size_t best = start + c;
        for (std::size_t k = 1; k < kernel; ++k) {
          const std::size_t idx = start + k * ch + c;
          if (x[idx] > x[best]) best = idx;
        }
        out[o + c] = x[best];
        argmax[o + c] = best;
      }
    }
  }
  return make_op(std::move(out), {input}, OpTag::maxpool1d,
                 [argmax = std::move(argmax)](Node& self) {
    double* dx = self.parents[0]->grad.ptr();
    const double* g = self.grad.ptr();
    for (std::size_t i = 0; i < argmax.size(); ++i) dx[argmax[i]] += g[i];
  });
}

// --------------------------------------------------------------------- dense

Var dense(const Var& x, const Var& weight, const Var& bias) {
  const NumArray& xv = x->value;
  const NumArray& w = weight->value;
  require_rank(xv, 2, "dense input");
  require_rank(w, 2, "dense weight");
  const std::size_t batch = xv.dim(0), din = xv.dim(1), dout = w.dim(1);
  if (w.dim(0) != din) {
    throw ShapeError("dense: input width " + std::to_string(din) +
                     " does not match weight rows " + std::to_string(w.dim(0)));
  }
  if (bias->value.size() != dout) throw ShapeError("dense: bias size mismatch");
  NumArray out(Shape{batch, dout});
  for (std::size_t b = 0; b < batch; ++b) {
    std::copy(bias->value.ptr(), bias->value.ptr() + dout, out.ptr() + b * dout);
  }
  gemm_accumulate(batch, din, dout, xv.ptr(), w.ptr(), out.ptr());
  return make_op(std::move(out), {x, weight, bias}, OpTag::dense,
                 [batch, din, dout](Node& self) {
    const Var& in = self.parents[0];
    const Var& wt = self.parents[1];
    const Var& bs = self.parents[2];
    const double* g = self.grad.ptr();
    if (bs->requires_grad) {
      double* db = bs->grad.ptr();
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t o = 0; o < dout; ++o) db[o] += g[b * dout + o];
      }
    }
    if (wt->requires_grad) {
      const NumArray xt = transpose2d(in->value.ptr(), batch, din);
      gemm_accumulate(din, batch, dout, xt.ptr(), g, wt->grad.ptr());
    }
    if (in->requires_grad) {
      const NumArray w_t = transpose2d(wt->value.ptr(), din, dout);
      gemm_accumulate(batch, dout, din, g, w_t.ptr(), in->grad.ptr());
    }
  });
}

// ---------------------------------------------------------------- elementwise

Var relu(const Var& x) {
  NumArray out = x->value;
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return make_op(std::move(out), {x}, OpTag::relu, [](Node& self) {
    const Var& in = self.parents[0];
    double* dx = in->grad.ptr();
    const double* xv = in->value.ptr();
    const double* g = self.grad.ptr();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (xv[i] > 0.0) dx[i] += g[i];
    }
  });
}

Var add(const Var& a, const Var& b) {
  if (a->value.shape() != b->value.shape()) {
    throw ShapeError("add: shapes " + shape_to_string(a->value.shape()) + " and " +
                     shape_to_string(b->value.shape()) + " differ");
  }
  NumArray out = a->value;
  accumulate(out, b->value);
  return make_op(std::move(out), {a, b}, OpTag::add, [](Node& self) {
    for (const Var& p : self.parents) {
      if (p->requires_grad) accumulate(p->grad, self.grad);
    }
  });
}

Var sub(const Var& a, const Var& b) {
  if (a->value.shape() != b->value.shape()) {
    throw ShapeError("sub: shapes " + shape_to_string(a->value.shape()) + " and " +
                     shape_to_string(b->value.shape()) + " differ");
  }
  NumArray out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b->value[i];
  return make_op(std::move(out), {a, b}, OpTag::sub, [](Node& self) {
    if (self.parents[0]->requires_grad) accumulate(self.parents[0]->grad, self.grad);
    if (self.parents[1]->requires_grad) {
      double* d = self.parents[1]->grad.ptr();
      for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] -= self.grad[i];
    }
  });
}

Var scale(const Var& a, double factor) {
  NumArray out = a->value;
  for (double& v : out.data()) v *= factor;
  return make_op(std::move(out), {a}, OpTag::scale, [factor](Node& self) {
    double* d = self.parents[0]->grad.ptr();
    for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += factor * self.grad[i];
  });
}

Var add_scalar(const Var& a, double offset) {
  NumArray out = a->value;
  for (double& v : out.data()) v += offset;
  return make_op(std::move(out), {a}, OpTag::add_scalar, [](Node& self) {
    accumulate(self.parents[0]->grad, self.grad);
  });
}

Var sum(const Var& a) {
  double total = 0.0;
  for (double v : a->value.data()) total += v;
  return make_op(NumArray(Shape{1}, total), {a}, OpTag::sum, [](Node& self) {
    const double g = self.grad[0];
    for (double& d : self.parents[0]->grad.data()) d += g;
  });
}

Var mean(const Var& a) {
  if (a->value.empty()) throw ShapeError("mean of empty array");
  const double inv = 1.0 / static_cast<double>(a->value.size());
  double total = 0.0;
  for (double v : a->value.data()) total += v;
  return make_op(NumArray(Shape{1}, total * inv), {a}, OpTag::mean, [inv](Node& self) {
    const double g = self.grad[0] * inv;
    for (double& d : self.parents[0]->grad.data()) d += g;
  });
}

Var concat_cols(const Var& a, const Var& b) {
  require_rank(a->value, 2, "concat_cols");
  require_rank(b->value, 2, "concat_cols");
  const std::size_t n = a->value.dim(0), da = a->value.dim(1), db = b->value.dim(1);
  if (b->value.dim(0) != n) throw ShapeError("concat_cols: row counts differ");
  NumArray out(Shape{n, da + db});
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(a->value.ptr() + r * da, da, out.ptr() + r * (da + db));
    std::copy_n(b->value.ptr() + r * db, db, out.ptr() + r * (da + db) + da);
  }
  return make_op(std::move(out), {a, b}, OpTag::concat_cols, [n, da, db](Node& self) {
    const Var& pa = self.parents[0];
    const Var& pb = self.parents[1];
    for (std::size_t r = 0; r < n; ++r) {
      const double* g = self.grad.ptr() + r * (da + db);
      if (pa->requires_grad) {
        double* d = pa->grad.ptr() + r * da;
        for (std::size_t i = 0; i < da; ++i) d[i] += g[i];
      }
      if (pb->requires_grad) {
        double* d = pb->grad.ptr() + r * db;
        for (std::size_t i = 0; i < db; ++i) d[i] += g[da + i];
      }
    }
  });
}

Var reshape(const Var& a, Shape shape) {
  return make_op(a->value.reshaped(std::move(shape)), {a}, OpTag::reshape,
                 [](Node& self) { accumulate(self.parents[0]->grad, self.grad); });
}

Var flatten(const Var& a) {
  if (a->value.rank() < 1) throw ShapeError("flatten: scalar input");
  const std::size_t batch = a->value.dim(0);
  return reshape(a, Shape{batch, batch == 0 ? 0 : a->value.size() / batch});
}

// ------------------------------------------------------------------ backward

void backward(const Var& root) {
  if (root->value.size() != 1) {
    throw ContractError("backward: root must be scalar, got shape " +
                        shape_to_string(root->value.shape()));
  }
  // Post-order DFS gives a topological order (parents before children).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node* node : order) node->grad = NumArray(node->value.shape());
  root->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
  }
  for (Node* node : order) {
    if (node->param != nullptr) accumulate(node->param->grad, node->grad);
  }
}

}  // namespace tfc::ad
