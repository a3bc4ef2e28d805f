#include "radargest/tensor/ops.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

#include "radargest/common/error.hpp"

namespace radargest::tensor {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMajor>;
using Map = Eigen::Map<RowMajor>;

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw Error(ErrorCode::kShape, std::string(op) + ": incompatible shapes " + shape_string(a) + " and " +
                                     shape_string(b));
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const std::string& why) {
  throw Error(ErrorCode::kShape, std::string(op) + ": shape " + shape_string(a) + " " + why);
}

Tape& tape_of(Var v) {
  if (v.tape == nullptr) fail(ErrorCode::kState, "variable is not attached to a tape");
  return *v.tape;
}

void accumulate(Tensor& dst, const Tensor& src) {
  double* d = dst.data();
  const double* s = src.data();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

struct AxisView {
  std::size_t outer = 1;
  std::size_t n = 1;
  std::size_t inner = 1;
  Shape reduced;
};

AxisView axis_view(const char* op, const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) shape_error(op, shape, "has no axis " + std::to_string(axis));
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
  v.n = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != axis) v.reduced.push_back(shape[i]);
  }
  if (v.n == 0) shape_error(op, shape, "reduces over an empty axis");
  return v;
}

// Element-wise op with a local derivative computed from input and output.
template <typename Fwd, typename Deriv>
Var unary(Var a, Fwd fwd, Deriv deriv) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
  return t.record(std::move(y), {a}, [a, deriv](Tape& tape, std::uint32_t self) {
    if (!tape.requires_grad(a.id)) return;
    const Tensor& g = tape.upstream(self);
    const Tensor& x = tape.value(a.id);
    const Tensor& y = tape.value(self);
    Tensor& ga = tape.grad_buffer(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * deriv(x[i], y[i]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  const Tensor& w = b.value();
  if (x.rank() != 2 || w.rank() != 2 || x.cols() != w.rows()) shape_error("matmul", x.shape(), w.shape());
  const auto m = static_cast<Eigen::Index>(x.rows());
  const auto k = static_cast<Eigen::Index>(x.cols());
  const auto n = static_cast<Eigen::Index>(w.cols());
  Tensor y({x.rows(), w.cols()});
  Map(y.data(), m, n).noalias() = MapC(x.data(), m, k) * MapC(w.data(), k, n);
  return t.record(std::move(y), {a, b}, [a, b, m, k, n](Tape& tape, std::uint32_t self) {
    const MapC g(tape.upstream(self).data(), m, n);
    if (tape.requires_grad(a.id)) {
      Map(tape.grad_buffer(a.id).data(), m, k).noalias() += g * MapC(tape.value(b.id).data(), k, n).transpose();
    }
    if (tape.requires_grad(b.id)) {
      Map(tape.grad_buffer(b.id).data(), k, n).noalias() += MapC(tape.value(a.id).data(), m, k).transpose() * g;
    }
  });
}

Var batch_matmul(Var a, Var b) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  const Tensor& w = b.value();
  if (x.rank() != 3 || w.rank() != 3 || x.dim(0) != w.dim(0) || x.dim(2) != w.dim(1)) {
    shape_error("batch_matmul", x.shape(), w.shape());
  }
  const std::size_t batch = x.dim(0);
  const auto m = static_cast<Eigen::Index>(x.dim(1));
  const auto k = static_cast<Eigen::Index>(x.dim(2));
  const auto n = static_cast<Eigen::Index>(w.dim(2));
  Tensor y({batch, x.dim(1), w.dim(2)});
  for (std::size_t i = 0; i < batch; ++i) {
    Map(y.data() + i * m * n, m, n).noalias() = MapC(x.data() + i * m * k, m, k) * MapC(w.data() + i * k * n, k, n);
  }
  return t.record(std::move(y), {a, b}, [a, b, batch, m, k, n](Tape& tape, std::uint32_t self) {
    const double* g = tape.upstream(self).data();
    const double* xa = tape.value(a.id).data();
    const double* wb = tape.value(b.id).data();
    const bool need_a = tape.requires_grad(a.id);
    const bool need_b = tape.requires_grad(b.id);
    double* ga = need_a ? tape.grad_buffer(a.id).data() : nullptr;
    double* gb = need_b ? tape.grad_buffer(b.id).data() : nullptr;
    for (std::size_t i = 0; i < batch; ++i) {
      const MapC gi(g + i * m * n, m, n);
      if (need_a) Map(ga + i * m * k, m, k).noalias() += gi * MapC(wb + i * k * n, k, n).transpose();
      if (need_b) Map(gb + i * k * n, k, n).noalias() += MapC(xa + i * m * k, m, k).transpose() * gi;
    }
  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  const Tensor& z = b.value();
  const bool same = x.shape() == z.shape();
  bool suffix = z.rank() <= x.rank();
  for (std::size_t i = 0; suffix && i < z.rank(); ++i) suffix = z.dim(i) == x.dim(x.rank() - z.rank() + i);
  if (!same && !suffix) shape_error("add", x.shape(), z.shape());
  Tensor y = x;
  const std::size_t period = std::max<std::size_t>(z.size(), 1);
  const std::size_t repeats = y.size() / period;
  for (std::size_t r = 0; r < repeats; ++r) {
    double* dst = y.data() + r * period;
    for (std::size_t i = 0; i < period; ++i) dst[i] += z[i];
  }
  return t.record(std::move(y), {a, b}, [a, b, period, repeats](Tape& tape, std::uint32_t self) {
    const Tensor& g = tape.upstream(self);
    if (tape.requires_grad(a.id)) accumulate(tape.grad_buffer(a.id), g);
    if (tape.requires_grad(b.id)) {
      double* gb = tape.grad_buffer(b.id).data();
      for (std::size_t r = 0; r < repeats; ++r) {
        const double* src = g.data() + r * period;
        for (std::size_t i = 0; i < period; ++i) gb[i] += src[i];
      }
    }
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  const Tensor& z = b.value();
  if (x.shape() != z.shape()) shape_error("sub", x.shape(), z.shape());
  Tensor y = x;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= z[i];
  return t.record(std::move(y), {a, b}, [a, b](Tape& tape, std::uint32_t self) {
    const Tensor& g = tape.upstream(self);
    if (tape.requires_grad(a.id)) accumulate(tape.grad_buffer(a.id), g);
    if (tape.requires_grad(b.id)) {
      Tensor& gb = tape.grad_buffer(b.id);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  const Tensor& z = b.value();
  if (x.shape() != z.shape()) shape_error("mul", x.shape(), z.shape());
  Tensor y = x;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= z[i];
  return t.record(std::move(y), {a, b}, [a, b](Tape& tape, std::uint32_t self) {
    const Tensor& g = tape.upstream(self);
    if (tape.requires_grad(a.id)) {
      Tensor& ga = tape.grad_buffer(a.id);
      const Tensor& zb = tape.value(b.id);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * zb[i];
    }
    if (tape.requires_grad(b.id)) {
      Tensor& gb = tape.grad_buffer(b.id);
      const Tensor& xa = tape.value(a.id);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * xa[i];
    }
  });
}

Var scale(Var a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(Var a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) fail(ErrorCode::kShape, "concat: no inputs");
  Tape& t = tape_of(parts[0]);
  const Shape& first = parts[0].shape();
  const std::size_t rank = first.size();
  if (rank < 1 || rank > 2 || axis >= rank) shape_error("concat", first, "is not concatenable along this axis");
  Shape out = first;
  out[axis] = 0;
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != rank) shape_error("concat", first, s);
    for (std::size_t i = 0; i < rank; ++i) {
      if (i != axis && s[i] != first[i]) shape_error("concat", first, s);
    }
    out[axis] += s[axis];
  }
  Tensor y(out);
  const std::size_t rows = rank == 2 ? out[0] : 1;
  const std::size_t cols = rank == 2 ? out[1] : out[0];
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const Var& p : parts) {
    offsets.push_back(off);
    const Tensor& v = p.value();
    const std::size_t pr = rank == 2 ? v.rows() : 1;
    const std::size_t pc = rank == 2 ? v.cols() : v.size();
    const bool along_rows = rank == 2 && axis == 0;
    for (std::size_t r = 0; r < pr; ++r) {
      for (std::size_t c = 0; c < pc; ++c) {
        const std::size_t dst = along_rows ? (off + r) * cols + c : r * cols + off + c;
        y[dst] = v[r * pc + c];
      }
    }
    off += along_rows ? pr : pc;
  }
  return t.record(std::move(y), parts, [parts, offsets, rank, axis, rows, cols](Tape& tape, std::uint32_t self) {
    (void)rows;
    const Tensor& g = tape.upstream(self);
    const bool along_rows = rank == 2 && axis == 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      if (!tape.requires_grad(parts[k].id)) continue;
      const Tensor& v = tape.value(parts[k].id);
      Tensor& gp = tape.grad_buffer(parts[k].id);
      const std::size_t pr = rank == 2 ? v.rows() : 1;
      const std::size_t pc = rank == 2 ? v.cols() : v.size();
      for (std::size_t r = 0; r < pr; ++r) {
        for (std::size_t c = 0; c < pc; ++c) {
          const std::size_t src = along_rows ? (offsets[k] + r) * cols + c : r * cols + offsets[k] + c;
          gp[r * pc + c] += g[src];
        }
      }
    }
  });
}

Var reshape(Var a, Shape shape) {
  Tape& t = tape_of(a);
  Tensor y = a.value().reshaped(std::move(shape));
  return t.record(std::move(y), {a}, [a](Tape& tape, std::uint32_t self) {
    if (tape.requires_grad(a.id)) accumulate(tape.grad_buffer(a.id), tape.upstream(self));
  });
}

Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  if (x.rank() < 1 || x.rank() > 2 || axis >= x.rank() || begin > end || end > x.dim(axis)) {
    shape_error("slice", x.shape(),
                "cannot take [" + std::to_string(begin) + ", " + std::to_string(end) + ") on axis " +
                    std::to_string(axis));
  }
  const std::size_t rows = x.rank() == 2 ? x.rows() : 1;
  const std::size_t cols = x.rank() == 2 ? x.cols() : x.size();
  const bool by_rows = x.rank() == 2 && axis == 0;
  Shape out = x.shape();
  out[axis] = end - begin;
  Tensor y(out);
  const std::size_t r0 = by_rows ? begin : 0;
  const std::size_t r1 = by_rows ? end : rows;
  const std::size_t c0 = by_rows ? 0 : begin;
  const std::size_t c1 = by_rows ? cols : end;
  const std::size_t oc = c1 - c0;
  for (std::size_t r = r0; r < r1; ++r) {
    std::copy(x.data() + r * cols + c0, x.data() + r * cols + c1, y.data() + (r - r0) * oc);
  }
  return t.record(std::move(y), {a}, [a, r0, r1, c0, c1, cols](Tape& tape, std::uint32_t self) {
    if (!tape.requires_grad(a.id)) return;
    const Tensor& g = tape.upstream(self);
    Tensor& ga = tape.grad_buffer(a.id);
    const std::size_t oc = c1 - c0;
    for (std::size_t r = r0; r < r1; ++r) {
      for (std::size_t c = c0; c < c1; ++c) ga[r * cols + c] += g[(r - r0) * oc + (c - c0)];
    }
  });
}

Var gather_rows(Var a, const std::vector<std::uint32_t>& rows) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  if (x.rank() != 2) shape_error("gather_rows", x.shape(), "is not rank 2");
  const std::size_t cols = x.cols();
  Tensor y({rows.size(), cols});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= x.rows()) shape_error("gather_rows", x.shape(), "has no row " + std::to_string(rows[i]));
    std::copy(x.data() + rows[i] * cols, x.data() + (rows[i] + 1) * cols, y.data() + i * cols);
  }
  return t.record(std::move(y), {a}, [a, rows, cols](Tape& tape, std::uint32_t self) {
    if (!tape.requires_grad(a.id)) return;
    const Tensor& g = tape.upstream(self);
    Tensor& ga = tape.grad_buffer(a.id);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      double* dst = ga.data() + rows[i] * cols;
      const double* src = g.data() + i * cols;
      for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
    }
  });
}

Var pick(Var a, const std::vector<std::uint32_t>& cols) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  if (x.rank() != 2 || cols.size() != x.rows()) shape_error("pick", x.shape(), "does not match the index list");
  Tensor y({x.rows()});
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (cols[r] >= x.cols()) shape_error("pick", x.shape(), "has no column " + std::to_string(cols[r]));
    y[r] = x.at(r, cols[r]);
  }
  const std::size_t width = x.cols();
  return t.record(std::move(y), {a}, [a, cols, width](Tape& tape, std::uint32_t self) {
    if (!tape.requires_grad(a.id)) return;
    const Tensor& g = tape.upstream(self);
    Tensor& ga = tape.grad_buffer(a.id);
    for (std::size_t r = 0; r < cols.size(); ++r) ga[r * width + cols[r]] += g[r];
  });
}

Var gather_max(Var a, const std::vector<std::uint32_t>& index, std::size_t group) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  if (x.rank() != 2 || group == 0 || index.size() % group != 0) {
    shape_error("gather_max", x.shape(), "does not match the index groups");
  }
  const std::size_t rows = index.size() / group;
  const std::size_t cols = x.cols();
  for (auto r : index) {
    if (r >= x.rows()) shape_error("gather_max", x.shape(), "has no row " + std::to_string(r));
  }
  Tensor y({rows, cols});
  std::vector<std::uint32_t> arg(rows * cols);
  for (std::size_t i = 0; i < rows; ++i) {
    const std::uint32_t* idx = index.data() + i * group;
    double* out = y.data() + i * cols;
    std::uint32_t* best = arg.data() + i * cols;
    const double* first = x.data() + static_cast<std::size_t>(idx[0]) * cols;
    for (std::size_t c = 0; c < cols; ++c) {
      out[c] = first[c];
      best[c] = idx[0];
    }
    for (std::size_t s = 1; s < group; ++s) {
      const double* row = x.data() + static_cast<std::size_t>(idx[s]) * cols;
      for (std::size_t c = 0; c < cols; ++c) {
        if (row[c] > out[c]) {
          out[c] = row[c];
          best[c] = idx[s];
        }
      }
    }
  }
  return t.record(std::move(y), {a}, [a, cols, arg = std::move(arg)](Tape& tape, std::uint32_t self) {
    if (!tape.requires_grad(a.id)) return;
    const Tensor& g = tape.upstream(self);
    Tensor& ga = tape.grad_buffer(a.id);
    for (std::size_t i = 0; i < arg.size(); ++i) ga[static_cast<std::size_t>(arg[i]) * cols + i % cols] += g[i];
  });
}

Var reduce_max(Var a, std::size_t axis) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  const AxisView v = axis_view("reduce_max", x.shape(), axis);
  Tensor y(v.reduced);
  std::vector<std::uint32_t> arg(y.size());
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t i = 0; i < v.inner; ++i) {
      const std::size_t base = o * v.n * v.inner + i;
      std::size_t best = 0;
      double best_val = x[base];
      for (std::size_t k = 1; k < v.n; ++k) {
        const double val = x[base + k * v.inner];
        if (val > best_val) {
          best_val = val;
          best = k;
        }
      }
      y[o * v.inner + i] = best_val;
      arg[o * v.inner + i] = static_cast<std::uint32_t>(base + best * v.inner);
    }
  }
  return t.record(std::move(y), {a}, [a, arg = std::move(arg)](Tape& tape, std::uint32_t self) {
    if (!tape.requires_grad(a.id)) return;
    const Tensor& g = tape.upstream(self);
    Tensor& ga = tape.grad_buffer(a.id);
    for (std::size_t i = 0; i < arg.size(); ++i) ga[arg[i]] += g[i];
  });
}

Var reduce_sum(Var a, std::size_t axis) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  const AxisView v = axis_view("reduce_sum", x.shape(), axis);
  Tensor y(v.reduced);
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t k = 0; k < v.n; ++k) {
      for (std::size_t i = 0; i < v.inner; ++i) y[o * v.inner + i] += x[(o * v.n + k) * v.inner + i];
    }
  }
  return t.record(std::move(y), {a}, [a, v](Tape& tape, std::uint32_t self) {
    if (!tape.requires_grad(a.id)) return;
    const Tensor& g = tape.upstream(self);
    Tensor& ga = tape.grad_buffer(a.id);
    for (std::size_t o = 0; o < v.outer; ++o) {
      for (std::size_t k = 0; k < v.n; ++k) {
        for (std::size_t i = 0; i < v.inner; ++i) ga[(o * v.n + k) * v.inner + i] += g[o * v.inner + i];
      }
    }
  });
}

Var reduce_mean(Var a, std::size_t axis) {
  const std::size_t n = axis_view("reduce_mean", a.shape(), axis).n;
  return scale(reduce_sum(a, axis), 1.0 / static_cast<double>(n));
}

Var reduce_sum(Var a) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i];
  return t.record(Tensor::scalar(s), {a}, [a](Tape& tape, std::uint32_t self) {
    if (!tape.requires_grad(a.id)) return;
    const double g = tape.upstream(self)[0];
    Tensor& ga = tape.grad_buffer(a.id);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
  });
}

Var reduce_mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) shape_error("reduce_mean", a.shape(), "is empty");
  return scale(reduce_sum(a), 1.0 / static_cast<double>(n));
}

Var leaky_relu(Var a, double alpha) {
  return unary(
      a, [alpha](double x) { return x > 0.0 ? x : alpha * x; },
      [alpha](double x, double) { return x > 0.0 ? 1.0 : alpha; });
}

Var relu(Var a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sqrt(Var a) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < 0.0) shape_error("sqrt", x.shape(), "has a negative entry");
    y[i] = std::sqrt(x[i]);
  }
  return t.record(std::move(y), {a}, [a](Tape& tape, std::uint32_t self) {
    if (!tape.requires_grad(a.id)) return;
    const Tensor& g = tape.upstream(self);
    const Tensor& y = tape.value(self);
    Tensor& ga = tape.grad_buffer(a.id);
    // Subgradient 0 at the origin.
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (y[i] > 0.0 && g[i] != 0.0) ga[i] += g[i] * 0.5 / y[i];
    }
  });
}

Var softmax(Var a) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  if (x.rank() == 0) shape_error("softmax", x.shape(), "is a scalar");
  const std::size_t width = x.shape().back();
  const std::size_t rows = x.size() / width;
  Tensor y(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data() + r * width;
    double* out = y.data() + r * width;
    const double m = *std::max_element(in, in + width);
    double s = 0.0;
    for (std::size_t c = 0; c < width; ++c) s += (out[c] = std::exp(in[c] - m));
    for (std::size_t c = 0; c < width; ++c) out[c] /= s;
  }
  return t.record(std::move(y), {a}, [a, rows, width](Tape& tape, std::uint32_t self) {
    if (!tape.requires_grad(a.id)) return;
    const Tensor& g = tape.upstream(self);
    const Tensor& y = tape.value(self);
    Tensor& ga = tape.grad_buffer(a.id);
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < width; ++c) dot += g[r * width + c] * y[r * width + c];
      for (std::size_t c = 0; c < width; ++c) ga[r * width + c] += y[r * width + c] * (g[r * width + c] - dot);
    }
  });
}

Var log_softmax(Var a) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  if (x.rank() == 0) shape_error("log_softmax", x.shape(), "is a scalar");
  const std::size_t width = x.shape().back();
  const std::size_t rows = x.size() / width;
  Tensor y(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data() + r * width;
    double* out = y.data() + r * width;
    const double m = *std::max_element(in, in + width);
    double s = 0.0;
    for (std::size_t c = 0; c < width; ++c) s += std::exp(in[c] - m);
    const double lse = m + std::log(s);
    for (std::size_t c = 0; c < width; ++c) out[c] = in[c] - lse;
  }
  return t.record(std::move(y), {a}, [a, rows, width](Tape& tape, std::uint32_t self) {
    if (!tape.requires_grad(a.id)) return;
    const Tensor& g = tape.upstream(self);
    const Tensor& y = tape.value(self);
    Tensor& ga = tape.grad_buffer(a.id);
    for (std::size_t r = 0; r < rows; ++r) {
      double gs = 0.0;
      for (std::size_t c = 0; c < width; ++c) gs += g[r * width + c];
      for (std::size_t c = 0; c < width; ++c) {
        ga[r * width + c] += g[r * width + c] - std::exp(y[r * width + c]) * gs;
      }
    }
  });
}

}  // namespace radargest::tensor
