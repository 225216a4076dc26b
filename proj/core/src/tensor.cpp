#include "tac/tensor.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "tac/errors.hpp"
#include "tac/rng.hpp"

namespace tac {

using detail::Node;
using EigenRowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<EigenRowMat>;
using ConstMapMat = Eigen::Map<const EigenRowMat>;

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i)
    os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

void Node::ensure_grad() {
  if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
}

namespace {

std::shared_ptr<Node> make_leaf(Shape shape, std::vector<double> data,
                                bool requires_grad) {
  for (std::size_t e : shape)
    if (e == 0) throw DimensionError("tensor extents must be >= 1");
  if (data.size() != shape_size(shape))
    throw DimensionError("data length does not match shape " +
                         shape_str(shape));
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->requires_grad = requires_grad;
  return n;
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  std::vector<double> d(shape_size(shape), 0.0);
  return Tensor(make_leaf(std::move(shape), std::move(d), requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> d(shape_size(shape), value);
  return Tensor(make_leaf(std::move(shape), std::move(d), requires_grad));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data,
                         bool requires_grad) {
  return Tensor(make_leaf(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(make_leaf(Shape{}, {value}, requires_grad));
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::size() const { return node_->data.size(); }
bool Tensor::requires_grad() const { return node_->requires_grad; }

std::span<const double> Tensor::data() const {
  return {node_->data.data(), node_->data.size()};
}

std::span<double> Tensor::mutable_data() {
  if (node_->backward)
    throw NumericError("mutable_data: only leaf tensors may be mutated");
  return {node_->data.data(), node_->data.size()};
}

std::span<const double> Tensor::grad() const {
  node_->ensure_grad();
  return {node_->grad.data(), node_->grad.size()};
}

double Tensor::item() const {
  if (size() != 1) throw DimensionError("item() requires a one-element tensor");
  return node_->data[0];
}

void Tensor::zero_grad() { node_->grad.assign(node_->data.size(), 0.0); }

void Tensor::backward() const {
  if (size() != 1)
    throw DimensionError("backward() must start from a scalar loss");
  // reverse topological order over the tape
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i < n->parents.size()) {
      Node* p = n->parents[i++].get();
      if (seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  node_->ensure_grad();
  node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->requires_grad) {
      for (auto& p : n->parents)
        if (p->requires_grad) p->ensure_grad();
      n->backward(*n);
    }
  }
}

Tensor Tensor::detach() const {
  auto n = std::make_shared<Node>();
  n->shape = node_->shape;
  n->data = node_->data;
  n->requires_grad = false;
  return Tensor(std::move(n));
}

Tensor make_op(Shape shape, std::vector<double> data,
               std::vector<Tensor> inputs,
               std::function<void(Node&)> backward) {
  auto n = make_leaf(std::move(shape), std::move(data), false);
  for (auto& in : inputs) {
    n->parents.push_back(in.node());
    n->requires_grad = n->requires_grad || in.requires_grad();
  }
  if (n->requires_grad) n->backward = std::move(backward);
  return Tensor(std::move(n));
}

// ---------------------------------------------------------------------------
// broadcasting
// ---------------------------------------------------------------------------

namespace {

Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t r = std::max(a.size(), b.size());
  Shape out(r);
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t ea = i < r - a.size() ? 1 : a[i - (r - a.size())];
    const std::size_t eb = i < r - b.size() ? 1 : b[i - (r - b.size())];
    if (ea != eb && ea != 1 && eb != 1)
      throw DimensionError("shapes " + shape_str(a) + " and " + shape_str(b) +
                           " are not broadcast-compatible");
    out[i] = std::max(ea, eb);
  }
  return out;
}

// for every flat index of `out`, the flat index into `in`
std::vector<std::size_t> bcast_map(const Shape& out, const Shape& in) {
  const std::size_t r = out.size();
  const std::size_t off = r - in.size();
  std::vector<std::size_t> in_strides(r, 0);
  std::size_t s = 1;
  for (std::size_t i = in.size(); i > 0; --i) {
    const std::size_t axis = off + i - 1;
    in_strides[axis] = (in[i - 1] == 1) ? 0 : s;
    s *= in[i - 1];
  }
  const std::size_t n = shape_size(out);
  std::vector<std::size_t> map(n);
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t flat = 0; flat < n; ++flat) {
    std::size_t pos = 0;
    for (std::size_t d = 0; d < r; ++d) pos += idx[d] * in_strides[d];
    map[flat] = pos;
    for (std::size_t d = r; d > 0; --d) {
      if (++idx[d - 1] < out[d - 1]) break;
      idx[d - 1] = 0;
    }
  }
  return map;
}

template <class Fwd, class BwdA, class BwdB>
Tensor binary_op(const Tensor& a, const Tensor& b, Fwd fwd, BwdA dda,
                 BwdB ddb) {
  const Shape out_shape = broadcast_shape(a.shape(), b.shape());
  const std::size_t n = shape_size(out_shape);
  std::vector<double> out(n);
  const bool same = a.shape() == b.shape();
  std::vector<std::size_t> ma, mb;
  if (!same) {
    ma = bcast_map(out_shape, a.shape());
    mb = bcast_map(out_shape, b.shape());
  }
  const auto ad = a.data();
  const auto bd = b.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double x = same ? ad[i] : ad[ma[i]];
    const double y = same ? bd[i] : bd[mb[i]];
    out[i] = fwd(x, y);
  }
  return make_op(
      out_shape, std::move(out), {a, b},
      [same, ma = std::move(ma), mb = std::move(mb), dda, ddb](Node& node) {
        Node& pa = *node.parents[0];
        Node& pb = *node.parents[1];
        const std::size_t n = node.data.size();
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t ia = same ? i : ma[i];
          const std::size_t ib = same ? i : mb[i];
          const double g = node.grad[i];
          const double x = pa.data[ia];
          const double y = pb.data[ib];
          if (pa.requires_grad) pa.grad[ia] += g * dda(x, y);
          if (pb.requires_grad) pb.grad[ib] += g * ddb(x, y);
        }
      });
}

template <class Fwd, class Dd>
Tensor unary_op(const Tensor& t, Fwd fwd, Dd dd) {
  const std::size_t n = t.size();
  std::vector<double> out(n);
  const auto d = t.data();
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(d[i]);
  return make_op(t.shape(), std::move(out), {t}, [dd](Node& node) {
    Node& p = *node.parents[0];
    for (std::size_t i = 0; i < node.data.size(); ++i)
      p.grad[i] += node.grad[i] * dd(p.data[i], node.data[i]);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Tensor neg(const Tensor& t) {
  return unary_op(
      t, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor relu(const Tensor& t) {
  return unary_op(
      t, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& t, double slope) {
  return unary_op(
      t, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Tensor sigmoid(const Tensor& t) {
  return unary_op(
      t,
      [](double x) {
        return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                        : std::exp(x) / (1.0 + std::exp(x));
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& t) {
  return unary_op(
      t, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Tensor log(const Tensor& t) {
  return unary_op(
      t, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Tensor abs(const Tensor& t) {
  // subgradient 0 at the kink
  return unary_op(
      t, [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor sqrt(const Tensor& t) {
  return unary_op(
      t, [](double x) { return std::sqrt(x); },
      [](double, double y) { return 0.5 / y; });
}

Tensor scale(const Tensor& t, double c) {
  return unary_op(
      t, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Tensor add_scalar(const Tensor& t, double c) {
  return unary_op(
      t, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

// ---------------------------------------------------------------------------
// matmul / conv2d
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw DimensionError("matmul expects rank-2 tensors");
  const std::size_t n = a.shape()[0], p = a.shape()[1];
  const std::size_t p2 = b.shape()[0], q = b.shape()[1];
  if (p != p2)
    throw DimensionError("matmul inner extents differ: " +
                         shape_str(a.shape()) + " x " + shape_str(b.shape()));
  std::vector<double> out(n * q);
  {
    ConstMapMat ma(a.data().data(), n, p);
    ConstMapMat mb(b.data().data(), p, q);
    MapMat mo(out.data(), n, q);
    mo.noalias() = ma * mb;
  }
  return make_op({n, q}, std::move(out), {a, b}, [n, p, q](Node& node) {
    Node& pa = *node.parents[0];
    Node& pb = *node.parents[1];
    ConstMapMat g(node.grad.data(), n, q);
    if (pa.requires_grad) {
      ConstMapMat mb(pb.data.data(), p, q);
      MapMat ga(pa.grad.data(), n, p);
      ga.noalias() += g * mb.transpose();
    }
    if (pb.requires_grad) {
      ConstMapMat ma(pa.data.data(), n, p);
      MapMat gb(pb.grad.data(), p, q);
      gb.noalias() += ma.transpose() * g;
    }
  });
}

namespace {

struct ConvDims {
  std::size_t n, c, h, w, f, kh, kw, oh, ow, stride, pad;
};

ConvDims conv_dims(const Tensor& input, const Tensor& kernel,
                   std::size_t stride, std::size_t padding) {
  if (input.rank() != 4 || kernel.rank() != 4)
    throw DimensionError("conv2d expects NCHW input and FCkHkW kernel");
  if (stride == 0) throw DimensionError("conv2d stride must be positive");
  ConvDims d{};
  d.n = input.shape()[0];
  d.c = input.shape()[1];
  d.h = input.shape()[2];
  d.w = input.shape()[3];
  d.f = kernel.shape()[0];
  d.kh = kernel.shape()[2];
  d.kw = kernel.shape()[3];
  d.stride = stride;
  d.pad = padding;
  if (kernel.shape()[1] != d.c)
    throw DimensionError("conv2d channel mismatch");
  if (d.kh > d.h + 2 * padding || d.kw > d.w + 2 * padding)
    throw DimensionError("conv2d kernel larger than padded input");
  d.oh = (d.h + 2 * padding - d.kh) / stride + 1;
  d.ow = (d.w + 2 * padding - d.kw) / stride + 1;
  return d;
}

// patch matrix [C*kH*kW, OH*OW] for one sample
void im2col(const double* in, const ConvDims& d, std::vector<double>& col) {
  const std::size_t cols = d.oh * d.ow;
  std::size_t row = 0;
  for (std::size_t c = 0; c < d.c; ++c)
    for (std::size_t ky = 0; ky < d.kh; ++ky)
      for (std::size_t kx = 0; kx < d.kw; ++kx, ++row) {
        double* dst = col.data() + row * cols;
        for (std::size_t oy = 0; oy < d.oh; ++oy) {
          const std::ptrdiff_t iy =
              static_cast<std::ptrdiff_t>(oy * d.stride + ky) -
              static_cast<std::ptrdiff_t>(d.pad);
          for (std::size_t ox = 0; ox < d.ow; ++ox) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * d.stride + kx) -
                static_cast<std::ptrdiff_t>(d.pad);
            double v = 0.0;
            if (iy >= 0 && iy < static_cast<std::ptrdiff_t>(d.h) && ix >= 0 &&
                ix < static_cast<std::ptrdiff_t>(d.w))
              v = in[(c * d.h + iy) * d.w + ix];
            *dst++ = v;
          }
        }
      }
}

void col2im_accumulate(const double* col, const ConvDims& d, double* out) {
  const std::size_t cols = d.oh * d.ow;
  std::size_t row = 0;
  for (std::size_t c = 0; c < d.c; ++c)
    for (std::size_t ky = 0; ky < d.kh; ++ky)
      for (std::size_t kx = 0; kx < d.kw; ++kx, ++row) {
        const double* src = col + row * cols;
        for (std::size_t oy = 0; oy < d.oh; ++oy) {
          const std::ptrdiff_t iy =
              static_cast<std::ptrdiff_t>(oy * d.stride + ky) -
              static_cast<std::ptrdiff_t>(d.pad);
          for (std::size_t ox = 0; ox < d.ow; ++ox) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * d.stride + kx) -
                static_cast<std::ptrdiff_t>(d.pad);
            if (iy >= 0 && iy < static_cast<std::ptrdiff_t>(d.h) && ix >= 0 &&
                ix < static_cast<std::ptrdiff_t>(d.w))
              out[(c * d.h + iy) * d.w + ix] += src[ox];
          }
        }
      }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride,
              std::size_t padding) {
  const ConvDims d = conv_dims(input, kernel, stride, padding);
  const std::size_t patch = d.c * d.kh * d.kw;
  const std::size_t cols = d.oh * d.ow;
  std::vector<double> out(d.n * d.f * cols);
  std::vector<double> col(patch * cols);
  ConstMapMat km(kernel.data().data(), d.f, patch);
  for (std::size_t s = 0; s < d.n; ++s) {
    im2col(input.data().data() + s * d.c * d.h * d.w, d, col);
    ConstMapMat cm(col.data(), patch, cols);
    MapMat om(out.data() + s * d.f * cols, d.f, cols);
    om.noalias() = km * cm;
  }
  return make_op(
      {d.n, d.f, d.oh, d.ow}, std::move(out), {input, kernel}, [d](Node& node) {
        Node& pin = *node.parents[0];
        Node& pk = *node.parents[1];
        const std::size_t patch = d.c * d.kh * d.kw;
        const std::size_t cols = d.oh * d.ow;
        std::vector<double> col(patch * cols);
        ConstMapMat km(pk.data.data(), d.f, patch);
        for (std::size_t s = 0; s < d.n; ++s) {
          ConstMapMat g(node.grad.data() + s * d.f * cols, d.f, cols);
          if (pk.requires_grad) {
            im2col(pin.data.data() + s * d.c * d.h * d.w, d, col);
            ConstMapMat cm(col.data(), patch, cols);
            MapMat gk(pk.grad.data(), d.f, patch);
            gk.noalias() += g * cm.transpose();
          }
          if (pin.requires_grad) {
            MapMat dcol(col.data(), patch, cols);
            dcol.noalias() = km.transpose() * g;
            col2im_accumulate(col.data(), d,
                              pin.grad.data() + s * d.c * d.h * d.w);
          }
        }
      });
}

// ---------------------------------------------------------------------------
// shape ops
// ---------------------------------------------------------------------------

Tensor reshape(const Tensor& t, Shape shape) {
  if (shape_size(shape) != t.size())
    throw DimensionError("reshape: size mismatch " + shape_str(t.shape()) +
                         " -> " + shape_str(shape));
  std::vector<double> out(t.data().begin(), t.data().end());
  return make_op(std::move(shape), std::move(out), {t}, [](Node& node) {
    Node& p = *node.parents[0];
    for (std::size_t i = 0; i < node.data.size(); ++i)
      p.grad[i] += node.grad[i];
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) throw DimensionError("concat: axis out of range");
  Shape out_shape = first;
  std::size_t total_axis = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size())
      throw DimensionError("concat: rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i)
      if (i != axis && s[i] != first[i])
        throw DimensionError("concat: extent mismatch off the concat axis");
    total_axis += s[axis];
  }
  out_shape[axis] = total_axis;

  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];

  std::vector<double> out(shape_size(out_shape));
  std::vector<std::size_t> axis_extents;
  for (const auto& p : parts) axis_extents.push_back(p.shape()[axis]);

  std::size_t offset = 0;
  for (std::size_t pi = 0; pi < parts.size(); ++pi) {
    const auto src = parts[pi].data();
    const std::size_t block = axis_extents[pi] * inner;
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(src.data() + o * block, block,
                  out.data() + o * total_axis * inner + offset * inner);
    offset += axis_extents[pi];
  }
  return make_op(std::move(out_shape), std::move(out), parts,
                 [outer, inner, total_axis, axis_extents](Node& node) {
                   std::size_t offset = 0;
                   for (std::size_t pi = 0; pi < node.parents.size(); ++pi) {
                     Node& p = *node.parents[pi];
                     const std::size_t block = axis_extents[pi] * inner;
                     if (p.requires_grad)
                       for (std::size_t o = 0; o < outer; ++o) {
                         const double* g = node.grad.data() +
                                           o * total_axis * inner +
                                           offset * inner;
                         double* dst = p.grad.data() + o * block;
                         for (std::size_t i = 0; i < block; ++i) dst[i] += g[i];
                       }
                     offset += axis_extents[pi];
                   }
                 });
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

Tensor reduce(const Tensor& t, const std::vector<std::size_t>& axes,
              Reduce mode) {
  const Shape& in = t.shape();
  std::vector<bool> reduced(in.size(), false);
  for (std::size_t a : axes) {
    if (a >= in.size())
      throw DimensionError("reduce: axis out of range for " + shape_str(in));
    reduced[a] = true;
  }
  Shape out_shape;
  for (std::size_t i = 0; i < in.size(); ++i)
    if (!reduced[i]) out_shape.push_back(in[i]);
  const std::size_t out_n = shape_size(out_shape);
  const std::size_t in_n = t.size();

  // out strides aligned to input axes (0 on reduced axes)
  std::vector<std::size_t> out_strides(in.size(), 0);
  {
    std::size_t s = 1;
    for (std::size_t i = in.size(); i > 0; --i) {
      if (!reduced[i - 1]) {
        out_strides[i - 1] = s;
        s *= in[i - 1];
      }
    }
  }
  std::vector<std::size_t> map(in_n);
  {
    std::vector<std::size_t> idx(in.size(), 0);
    for (std::size_t flat = 0; flat < in_n; ++flat) {
      std::size_t pos = 0;
      for (std::size_t d = 0; d < in.size(); ++d)
        pos += idx[d] * out_strides[d];
      map[flat] = pos;
      for (std::size_t d = in.size(); d > 0; --d) {
        if (++idx[d - 1] < in[d - 1]) break;
        idx[d - 1] = 0;
      }
    }
  }

  const double count =
      static_cast<double>(in_n) / static_cast<double>(out_n);
  const auto d = t.data();
  std::vector<double> out;
  std::vector<std::size_t> argmax;  // max mode only; first index wins ties
  if (mode == Reduce::Max) {
    out.assign(out_n, -std::numeric_limits<double>::infinity());
    argmax.assign(out_n, 0);
    for (std::size_t i = 0; i < in_n; ++i)
      if (d[i] > out[map[i]]) {
        out[map[i]] = d[i];
        argmax[map[i]] = i;
      }
  } else {
    out.assign(out_n, 0.0);
    for (std::size_t i = 0; i < in_n; ++i) out[map[i]] += d[i];
    if (mode == Reduce::Mean)
      for (double& v : out) v /= count;
  }
  return make_op(std::move(out_shape), std::move(out), {t},
                 [mode, count, map = std::move(map),
                  argmax = std::move(argmax)](Node& node) {
                   Node& p = *node.parents[0];
                   if (mode == Reduce::Max) {
                     for (std::size_t o = 0; o < node.data.size(); ++o)
                       p.grad[argmax[o]] += node.grad[o];
                   } else {
                     const double f = mode == Reduce::Mean ? 1.0 / count : 1.0;
                     for (std::size_t i = 0; i < p.data.size(); ++i)
                       p.grad[i] += f * node.grad[map[i]];
                   }
                 });
}

Tensor reduce_all(const Tensor& t, Reduce mode) {
  std::vector<std::size_t> axes(t.rank());
  for (std::size_t i = 0; i < axes.size(); ++i) axes[i] = i;
  return reduce(t, axes, mode);
}

// ---------------------------------------------------------------------------
// fused losses
// ---------------------------------------------------------------------------

Tensor bce_with_logits_mean(const Tensor& logits, const Tensor& targets) {
  if (logits.shape() != targets.shape())
    throw DimensionError("bce_with_logits_mean: shape mismatch");
  const std::size_t n = logits.size();
  const auto a = logits.data();
  const auto t = targets.data();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    total += std::max(a[i], 0.0) - a[i] * t[i] + std::log1p(std::exp(-std::fabs(a[i])));
  total /= static_cast<double>(n);
  return make_op(Shape{}, {total}, {logits, targets}, [n](Node& node) {
    Node& pa = *node.parents[0];
    Node& pt = *node.parents[1];
    const double g = node.grad[0] / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = pa.data[i];
      const double s = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                                : std::exp(x) / (1.0 + std::exp(x));
      if (pa.requires_grad) pa.grad[i] += g * (s - pt.data[i]);
      if (pt.requires_grad) pt.grad[i] += g * (-x);
    }
  });
}

Tensor softmax_cross_entropy(const Tensor& logits, const Tensor& targets) {
  if (logits.rank() != 2 || logits.shape() != targets.shape())
    throw DimensionError("softmax_cross_entropy: expects matching [N,K]");
  const std::size_t n = logits.shape()[0], k = logits.shape()[1];
  const auto a = logits.data();
  const auto t = targets.data();
  std::vector<double> prob(n * k);
  std::vector<double> logprob(n * k);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double m = a[i * k];
    for (std::size_t j = 1; j < k; ++j) m = std::max(m, a[i * k + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(a[i * k + j] - m);
    const double lse = m + std::log(z);
    for (std::size_t j = 0; j < k; ++j) {
      logprob[i * k + j] = a[i * k + j] - lse;
      prob[i * k + j] = std::exp(logprob[i * k + j]);
      total -= t[i * k + j] * logprob[i * k + j];
    }
  }
  total /= static_cast<double>(n);
  return make_op(Shape{}, {total}, {logits, targets},
                 [n, k, prob = std::move(prob),
                  logprob = std::move(logprob)](Node& node) {
                   Node& pa = *node.parents[0];
                   Node& pt = *node.parents[1];
                   const double g = node.grad[0] / static_cast<double>(n);
                   for (std::size_t i = 0; i < n; ++i) {
                     double tsum = 0.0;
                     for (std::size_t j = 0; j < k; ++j)
                       tsum += pt.data[i * k + j];
                     for (std::size_t j = 0; j < k; ++j) {
                       if (pa.requires_grad)
                         pa.grad[i * k + j] +=
                             g * (prob[i * k + j] * tsum - pt.data[i * k + j]);
                       if (pt.requires_grad)
                         pt.grad[i * k + j] += g * (-logprob[i * k + j]);
                     }
                   }
                 });
}

// ---------------------------------------------------------------------------
// init helpers
// ---------------------------------------------------------------------------

Tensor uniform_init(Shape shape, double lo, double hi, Rng& rng,
                    bool requires_grad) {
  std::vector<double> d(shape_size(shape));
  for (double& v : d) v = rng.uniform(lo, hi);
  return Tensor::from_data(std::move(shape), std::move(d), requires_grad);
}

Tensor normal_init(Shape shape, double stddev, Rng& rng, bool requires_grad) {
  std::vector<double> d(shape_size(shape));
  for (double& v : d) v = stddev * rng.normal();
  return Tensor::from_data(std::move(shape), std::move(d), requires_grad);
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

GradCheckReport gradcheck(
    const std::function<Tensor(const std::vector<Tensor>&)>& f,
    std::vector<Tensor> points, double eps, double tol) {
  Tensor loss = f(points);
  if (!std::isfinite(loss.item()))
    throw NumericError("gradcheck: non-finite loss");
  loss.backward();
  std::vector<std::vector<double>> analytic;
  for (auto& p : points) {
    analytic.emplace_back(p.grad().begin(), p.grad().end());
  }
  GradCheckReport report;
  report.pass = true;
  for (std::size_t pi = 0; pi < points.size(); ++pi) {
    if (!points[pi].requires_grad()) continue;
    auto d = points[pi].mutable_data();
    for (std::size_t j = 0; j < d.size(); ++j) {
      const double saved = d[j];
      d[j] = saved + eps;
      const double up = f(points).item();
      d[j] = saved - eps;
      const double down = f(points).item();
      d[j] = saved;
      if (!std::isfinite(up) || !std::isfinite(down))
        throw NumericError("gradcheck: non-finite perturbed loss");
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[pi][j];
      const double rel = std::fabs(a - numeric) /
                         std::max({1.0, std::fabs(a), std::fabs(numeric)});
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst =
            "input " + std::to_string(pi) + ", element " + std::to_string(j);
      }
    }
    points[pi].zero_grad();
  }
  report.pass = report.max_rel_error <= tol;
  return report;
}

}  // namespace tac
