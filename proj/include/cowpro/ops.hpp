#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "cowpro/tensor.hpp"

// Dense tensor ops with reverse-mode gradients. Shapes are validated up
// front; every op leaves finite values behind on finite inputs (losses clamp
// before log, similarity denominators carry an epsilon). Parents are listed
// in the order the op takes them.

namespace cowpro {

namespace detail {

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " +
                                        shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

// Decompose an index space around `axis` so axis-wise loops are flat.
inline void axis_split(const Shape& shape, int axis, std::int64_t& outer, std::int64_t& n,
                       std::int64_t& inner) {
    outer = 1;
    inner = 1;
    for (int i = 0; i < axis; ++i) outer *= shape[static_cast<std::size_t>(i)];
    n = shape[static_cast<std::size_t>(axis)];
    for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < shape.size(); ++i)
        inner *= shape[i];
}

}  // namespace detail

// -------------------- elementwise --------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    detail::check_same_shape(a, b, "add");
    std::vector<T> out(a.data().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    return Tensor<T>::make_op(a.shape(), std::move(out), {a, b}, [](auto& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            if (pa.requires_grad) pa.grad[i] += self.grad[i];
            if (pb.requires_grad) pb.grad[i] += self.grad[i];
        }
    });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    detail::check_same_shape(a, b, "sub");
    std::vector<T> out(a.data().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
    return Tensor<T>::make_op(a.shape(), std::move(out), {a, b}, [](auto& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            if (pa.requires_grad) pa.grad[i] += self.grad[i];
            if (pb.requires_grad) pb.grad[i] -= self.grad[i];
        }
    });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    detail::check_same_shape(a, b, "mul");
    std::vector<T> out(a.data().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    return Tensor<T>::make_op(a.shape(), std::move(out), {a, b}, [](auto& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            if (pa.requires_grad) pa.grad[i] += self.grad[i] * pb.data[i];
            if (pb.requires_grad) pb.grad[i] += self.grad[i] * pa.data[i];
        }
    });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c) {
    std::vector<T> out(a.data().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * c;
    return Tensor<T>::make_op(a.shape(), std::move(out), {a}, [c](auto& self) {
        auto& pa = *self.parents[0];
        for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * c;
    });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
    std::vector<T> out(a.data().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] > T(0) ? a.data()[i] : T(0);
    return Tensor<T>::make_op(a.shape(), std::move(out), {a}, [](auto& self) {
        auto& pa = *self.parents[0];
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            if (pa.data[i] > T(0)) pa.grad[i] += self.grad[i];
    });
}

// log with the input clamped at 1e-12; the clamp keeps saturated
// probabilities finite and contributes zero gradient in the flat region.
template <typename T>
Tensor<T> elem_log(const Tensor<T>& a) {
    const T floor_v = T(1e-12);
    std::vector<T> out(a.data().size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = std::log(std::max(a.data()[i], floor_v));
    return Tensor<T>::make_op(a.shape(), std::move(out), {a}, [floor_v](auto& self) {
        auto& pa = *self.parents[0];
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            if (pa.data[i] > floor_v) pa.grad[i] += self.grad[i] / pa.data[i];
    });
}

template <typename T>
Tensor<T> elem_exp(const Tensor<T>& a) {
    std::vector<T> out(a.data().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(a.data()[i]);
    return Tensor<T>::make_op(a.shape(), std::move(out), {a}, [](auto& self) {
        auto& pa = *self.parents[0];
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            pa.grad[i] += self.grad[i] * self.data[i];
    });
}

// -------------------- reductions / reshapes --------------------

template <typename T>
Tensor<T> sum_all(const Tensor<T>& a) {
    T s = T(0);
    for (T v : a.data()) s += v;
    return Tensor<T>::make_op({1}, {s}, {a}, [](auto& self) {
        auto& pa = *self.parents[0];
        for (std::size_t i = 0; i < pa.grad.size(); ++i) pa.grad[i] += self.grad[0];
    });
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& a) {
    T s = T(0);
    for (T v : a.data()) s += v;
    T inv = T(1) / static_cast<T>(a.numel());
    return Tensor<T>::make_op({1}, {s * inv}, {a}, [inv](auto& self) {
        auto& pa = *self.parents[0];
        for (std::size_t i = 0; i < pa.grad.size(); ++i) pa.grad[i] += self.grad[0] * inv;
    });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
    require(numel_of(shape) == a.numel(),
            "reshape: element count mismatch " + shape_str(a.shape()) + " -> " + shape_str(shape));
    return Tensor<T>::make_op(std::move(shape), a.data(), {a}, [](auto& self) {
        auto& pa = *self.parents[0];
        for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
    });
}

// Stack same-shape tensors along a new leading axis.
template <typename T>
Tensor<T> stack0(const std::vector<Tensor<T>>& parts) {
    require(!parts.empty(), "stack0: no inputs");
    for (const auto& p : parts) detail::check_same_shape(parts[0], p, "stack0");
    const std::int64_t per = parts[0].numel();
    Shape shape;
    shape.push_back(static_cast<int>(parts.size()));
    for (int d : parts[0].shape()) shape.push_back(d);
    std::vector<T> out(static_cast<std::size_t>(per * static_cast<std::int64_t>(parts.size())));
    for (std::size_t i = 0; i < parts.size(); ++i)
        std::copy(parts[i].data().begin(), parts[i].data().end(),
                  out.begin() + static_cast<std::ptrdiff_t>(per * static_cast<std::int64_t>(i)));
    return Tensor<T>::make_op(std::move(shape), std::move(out), parts, [per](auto& self) {
        for (std::size_t i = 0; i < self.parents.size(); ++i) {
            auto& p = *self.parents[i];
            if (!p.requires_grad) continue;
            const std::size_t base = static_cast<std::size_t>(per) * i;
            for (std::int64_t j = 0; j < per; ++j)
                p.grad[static_cast<std::size_t>(j)] += self.grad[base + static_cast<std::size_t>(j)];
        }
    });
}

// Select one slice along axis 0.
template <typename T>
Tensor<T> index_axis0(const Tensor<T>& a, int index) {
    require(a.rank() >= 1 && index >= 0 && index < a.dim(0),
            "index_axis0: index " + std::to_string(index) + " out of range for " +
                shape_str(a.shape()));
    Shape shape(a.shape().begin() + 1, a.shape().end());
    if (shape.empty()) shape.push_back(1);
    const std::int64_t per = numel_of(shape);
    const std::size_t base = static_cast<std::size_t>(per) * static_cast<std::size_t>(index);
    std::vector<T> out(a.data().begin() + static_cast<std::ptrdiff_t>(base),
                       a.data().begin() + static_cast<std::ptrdiff_t>(base + static_cast<std::size_t>(per)));
    return Tensor<T>::make_op(std::move(shape), std::move(out), {a}, [base](auto& self) {
        auto& pa = *self.parents[0];
        for (std::size_t j = 0; j < self.grad.size(); ++j) pa.grad[base + j] += self.grad[j];
    });
}

// -------------------- linear algebra --------------------

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    require(a.rank() == 2 && b.rank() == 2, "matmul expects rank-2 operands");
    require(a.dim(1) == b.dim(0), "matmul: inner dims differ " + shape_str(a.shape()) + " x " +
                                      shape_str(b.shape()));
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<T> out(static_cast<std::size_t>(m) * static_cast<std::size_t>(n), T(0));
    for (int i = 0; i < m; ++i)
        for (int kk = 0; kk < k; ++kk) {
            const T av = a.data()[static_cast<std::size_t>(i * k + kk)];
            for (int j = 0; j < n; ++j)
                out[static_cast<std::size_t>(i * n + j)] += av * b.data()[static_cast<std::size_t>(kk * n + j)];
        }
    return Tensor<T>::make_op({m, n}, std::move(out), {a, b}, [m, k, n](auto& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) {
                const T g = self.grad[static_cast<std::size_t>(i * n + j)];
                for (int kk = 0; kk < k; ++kk) {
                    if (pa.requires_grad)
                        pa.grad[static_cast<std::size_t>(i * k + kk)] +=
                            g * pb.data[static_cast<std::size_t>(kk * n + j)];
                    if (pb.requires_grad)
                        pb.grad[static_cast<std::size_t>(kk * n + j)] +=
                            g * pa.data[static_cast<std::size_t>(i * k + kk)];
                }
            }
    });
}

// -------------------- spatial ops --------------------

// Cross-correlation conv2d over [C,H,W] with kernel [Cout,Cin,kh,kw].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, int stride, int padding,
                 int dilation) {
    require(input.rank() == 3, "conv2d: input must be [C,H,W], got " + shape_str(input.shape()));
    require(kernel.rank() == 4,
            "conv2d: kernel must be [Cout,Cin,kh,kw], got " + shape_str(kernel.shape()));
    require(kernel.dim(1) == input.dim(0),
            "conv2d: input channels " + std::to_string(input.dim(0)) +
                " do not match kernel channels " + std::to_string(kernel.dim(1)));
    require(kernel.dim(2) % 2 == 1 && kernel.dim(3) % 2 == 1, "conv2d: kernel extents must be odd");
    require(stride >= 1 && dilation >= 1 && padding >= 0, "conv2d: bad stride/padding/dilation");

    const int cin = input.dim(0), h = input.dim(1), w = input.dim(2);
    const int cout = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
    const int oh = (h + 2 * padding - dilation * (kh - 1) - 1) / stride + 1;
    const int ow = (w + 2 * padding - dilation * (kw - 1) - 1) / stride + 1;
    require(oh > 0 && ow > 0, "conv2d: empty output for input " + shape_str(input.shape()));

    std::vector<T> out(static_cast<std::size_t>(cout) * oh * ow, T(0));
    const T* in = input.data().data();
    const T* ker = kernel.data().data();
    for (int co = 0; co < cout; ++co)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                T acc = T(0);
                for (int ci = 0; ci < cin; ++ci)
                    for (int ky = 0; ky < kh; ++ky) {
                        const int iy = oy * stride - padding + ky * dilation;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < kw; ++kx) {
                            const int ix = ox * stride - padding + kx * dilation;
                            if (ix < 0 || ix >= w) continue;
                            acc += in[(static_cast<std::size_t>(ci) * h + iy) * w + ix] *
                                   ker[((static_cast<std::size_t>(co) * cin + ci) * kh + ky) * kw + kx];
                        }
                    }
                out[(static_cast<std::size_t>(co) * oh + oy) * ow + ox] = acc;
            }

    auto bw = [stride, padding, dilation, cin, h, w, cout, kh, kw, oh, ow](auto& self) {
        auto& pin = *self.parents[0];
        auto& pker = *self.parents[1];
        for (int co = 0; co < cout; ++co)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    const T g = self.grad[(static_cast<std::size_t>(co) * oh + oy) * ow + ox];
                    if (g == T(0)) continue;
                    for (int ci = 0; ci < cin; ++ci)
                        for (int ky = 0; ky < kh; ++ky) {
                            const int iy = oy * stride - padding + ky * dilation;
                            if (iy < 0 || iy >= h) continue;
                            for (int kx = 0; kx < kw; ++kx) {
                                const int ix = ox * stride - padding + kx * dilation;
                                if (ix < 0 || ix >= w) continue;
                                const std::size_t ii =
                                    (static_cast<std::size_t>(ci) * h + iy) * w + ix;
                                const std::size_t kidx =
                                    ((static_cast<std::size_t>(co) * cin + ci) * kh + ky) * kw + kx;
                                if (pin.requires_grad) pin.grad[ii] += g * pker.data[kidx];
                                if (pker.requires_grad) pker.grad[kidx] += g * pin.data[ii];
                            }
                        }
                }
    };
    return Tensor<T>::make_op({cout, oh, ow}, std::move(out), {input, kernel}, std::move(bw));
}

template <typename T>
Tensor<T> add_channel_bias(const Tensor<T>& x, const Tensor<T>& bias) {
    require(x.rank() == 3, "add_channel_bias: x must be [C,H,W]");
    require(bias.rank() == 1 && bias.dim(0) == x.dim(0),
            "add_channel_bias: bias must be [C] with C=" + std::to_string(x.dim(0)));
    const int c = x.dim(0);
    const std::int64_t hw = static_cast<std::int64_t>(x.dim(1)) * x.dim(2);
    std::vector<T> out(x.data().size());
    for (int ci = 0; ci < c; ++ci)
        for (std::int64_t i = 0; i < hw; ++i) {
            const std::size_t idx = static_cast<std::size_t>(ci * hw + i);
            out[idx] = x.data()[idx] + bias.data()[static_cast<std::size_t>(ci)];
        }
    return Tensor<T>::make_op(x.shape(), std::move(out), {x, bias}, [c, hw](auto& self) {
        auto& px = *self.parents[0];
        auto& pb = *self.parents[1];
        for (int ci = 0; ci < c; ++ci)
            for (std::int64_t i = 0; i < hw; ++i) {
                const std::size_t idx = static_cast<std::size_t>(ci * hw + i);
                if (px.requires_grad) px.grad[idx] += self.grad[idx];
                if (pb.requires_grad) pb.grad[static_cast<std::size_t>(ci)] += self.grad[idx];
            }
    });
}

// Average pooling over [C,H,W]. Non-divisible extents are zero-padded on the
// bottom/right; the divisor is always window*window.
template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& input, int window) {
    require(input.rank() == 3, "avg_pool2d: input must be [C,H,W]");
    require(window >= 1, "avg_pool2d: window must be >= 1");
    const int c = input.dim(0), h = input.dim(1), w = input.dim(2);
    const int oh = (h + window - 1) / window;
    const int ow = (w + window - 1) / window;
    const T inv = T(1) / static_cast<T>(window * window);
    std::vector<T> out(static_cast<std::size_t>(c) * oh * ow, T(0));
    for (int ci = 0; ci < c; ++ci)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                T acc = T(0);
                for (int dy = 0; dy < window; ++dy) {
                    const int iy = oy * window + dy;
                    if (iy >= h) continue;
                    for (int dx = 0; dx < window; ++dx) {
                        const int ix = ox * window + dx;
                        if (ix >= w) continue;
                        acc += input.data()[(static_cast<std::size_t>(ci) * h + iy) * w + ix];
                    }
                }
                out[(static_cast<std::size_t>(ci) * oh + oy) * ow + ox] = acc * inv;
            }
    return Tensor<T>::make_op({c, oh, ow}, std::move(out), {input},
                              [c, h, w, oh, ow, window, inv](auto& self) {
                                  auto& pin = *self.parents[0];
                                  for (int ci = 0; ci < c; ++ci)
                                      for (int oy = 0; oy < oh; ++oy)
                                          for (int ox = 0; ox < ow; ++ox) {
                                              const T g =
                                                  self.grad[(static_cast<std::size_t>(ci) * oh + oy) * ow + ox] * inv;
                                              for (int dy = 0; dy < window; ++dy) {
                                                  const int iy = oy * window + dy;
                                                  if (iy >= h) continue;
                                                  for (int dx = 0; dx < window; ++dx) {
                                                      const int ix = ox * window + dx;
                                                      if (ix >= w) continue;
                                                      pin.grad[(static_cast<std::size_t>(ci) * h + iy) * w + ix] += g;
                                                  }
                                              }
                                          }
                              });
}

namespace detail {

struct ResizeAxis {
    std::vector<int> i0, i1;
    std::vector<double> frac;
};

// Half-pixel-center source coordinates with border replication.
inline ResizeAxis resize_axis(int in_n, int out_n) {
    ResizeAxis ax;
    ax.i0.resize(static_cast<std::size_t>(out_n));
    ax.i1.resize(static_cast<std::size_t>(out_n));
    ax.frac.resize(static_cast<std::size_t>(out_n));
    const double scale = static_cast<double>(in_n) / static_cast<double>(out_n);
    for (int o = 0; o < out_n; ++o) {
        double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
        double f = std::floor(src);
        int n0 = static_cast<int>(f);
        double frac = src - f;
        int n1 = n0 + 1;
        ax.i0[static_cast<std::size_t>(o)] = std::clamp(n0, 0, in_n - 1);
        ax.i1[static_cast<std::size_t>(o)] = std::clamp(n1, 0, in_n - 1);
        ax.frac[static_cast<std::size_t>(o)] = frac;
    }
    return ax;
}

}  // namespace detail

template <typename T>
Tensor<T> bilinear_resize(const Tensor<T>& input, int out_h, int out_w) {
    require(input.rank() == 3, "bilinear_resize: input must be [C,h,w]");
    require(out_h >= 1 && out_w >= 1, "bilinear_resize: output extents must be >= 1");
    const int c = input.dim(0), h = input.dim(1), w = input.dim(2);
    const auto ay = detail::resize_axis(h, out_h);
    const auto axx = detail::resize_axis(w, out_w);
    std::vector<T> out(static_cast<std::size_t>(c) * out_h * out_w);
    for (int ci = 0; ci < c; ++ci) {
        const T* plane = input.data().data() + static_cast<std::size_t>(ci) * h * w;
        for (int oy = 0; oy < out_h; ++oy) {
            const int y0 = ay.i0[static_cast<std::size_t>(oy)], y1 = ay.i1[static_cast<std::size_t>(oy)];
            const T fy = static_cast<T>(ay.frac[static_cast<std::size_t>(oy)]);
            for (int ox = 0; ox < out_w; ++ox) {
                const int x0 = axx.i0[static_cast<std::size_t>(ox)], x1 = axx.i1[static_cast<std::size_t>(ox)];
                const T fx = static_cast<T>(axx.frac[static_cast<std::size_t>(ox)]);
                const T v = (T(1) - fy) * ((T(1) - fx) * plane[y0 * w + x0] + fx * plane[y0 * w + x1]) +
                            fy * ((T(1) - fx) * plane[y1 * w + x0] + fx * plane[y1 * w + x1]);
                out[(static_cast<std::size_t>(ci) * out_h + oy) * out_w + ox] = v;
            }
        }
    }
    return Tensor<T>::make_op(
        {c, out_h, out_w}, std::move(out), {input}, [c, h, w, out_h, out_w, ay, axx](auto& self) {
            auto& pin = *self.parents[0];
            for (int ci = 0; ci < c; ++ci) {
                T* gplane = pin.grad.data() + static_cast<std::size_t>(ci) * h * w;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int y0 = ay.i0[static_cast<std::size_t>(oy)], y1 = ay.i1[static_cast<std::size_t>(oy)];
                    const T fy = static_cast<T>(ay.frac[static_cast<std::size_t>(oy)]);
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int x0 = axx.i0[static_cast<std::size_t>(ox)],
                                  x1 = axx.i1[static_cast<std::size_t>(ox)];
                        const T fx = static_cast<T>(axx.frac[static_cast<std::size_t>(ox)]);
                        const T g = self.grad[(static_cast<std::size_t>(ci) * out_h + oy) * out_w + ox];
                        gplane[y0 * w + x0] += g * (T(1) - fy) * (T(1) - fx);
                        gplane[y0 * w + x1] += g * (T(1) - fy) * fx;
                        gplane[y1 * w + x0] += g * fy * (T(1) - fx);
                        gplane[y1 * w + x1] += g * fy * fx;
                    }
                }
            }
        });
}

// -------------------- softmax & losses --------------------

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis, T temperature) {
    require(temperature > T(0), "softmax: temperature must be > 0");
    require(axis >= 0 && axis < x.rank(), "softmax: axis out of range");
    std::int64_t outer, n, inner;
    detail::axis_split(x.shape(), axis, outer, n, inner);
    std::vector<T> out(x.data().size());
    for (std::int64_t o = 0; o < outer; ++o)
        for (std::int64_t i = 0; i < inner; ++i) {
            T m = x.data()[static_cast<std::size_t>((o * n) * inner + i)];
            for (std::int64_t j = 1; j < n; ++j)
                m = std::max(m, x.data()[static_cast<std::size_t>((o * n + j) * inner + i)]);
            T denom = T(0);
            for (std::int64_t j = 0; j < n; ++j) {
                const std::size_t idx = static_cast<std::size_t>((o * n + j) * inner + i);
                const T e = std::exp((x.data()[idx] - m) / temperature);
                out[idx] = e;
                denom += e;
            }
            for (std::int64_t j = 0; j < n; ++j)
                out[static_cast<std::size_t>((o * n + j) * inner + i)] /= denom;
        }
    return Tensor<T>::make_op(x.shape(), std::move(out), {x},
                              [outer, n, inner, temperature](auto& self) {
                                  auto& px = *self.parents[0];
                                  for (std::int64_t o = 0; o < outer; ++o)
                                      for (std::int64_t i = 0; i < inner; ++i) {
                                          T dot = T(0);
                                          for (std::int64_t j = 0; j < n; ++j) {
                                              const std::size_t idx =
                                                  static_cast<std::size_t>((o * n + j) * inner + i);
                                              dot += self.grad[idx] * self.data[idx];
                                          }
                                          for (std::int64_t j = 0; j < n; ++j) {
                                              const std::size_t idx =
                                                  static_cast<std::size_t>((o * n + j) * inner + i);
                                              px.grad[idx] +=
                                                  self.data[idx] * (self.grad[idx] - dot) / temperature;
                                          }
                                      }
                              });
}

// Mean over pixels of -weight(class) * log(prob of the true class).
// pred_probs is [2,H,W] with channel 0 = background; target is a binary
// [H,W] mask. Probabilities are clamped at 1e-12 before the log.
template <typename T>
Tensor<T> weighted_cross_entropy(const Tensor<T>& pred_probs, const Tensor<T>& target,
                                 T weight_bg, T weight_fg) {
    require(pred_probs.rank() == 3 && pred_probs.dim(0) == 2,
            "weighted_cross_entropy: pred must be [2,H,W], got " + shape_str(pred_probs.shape()));
    require(target.rank() == 2 && target.dim(0) == pred_probs.dim(1) &&
                target.dim(1) == pred_probs.dim(2),
            "weighted_cross_entropy: target shape " + shape_str(target.shape()) +
                " does not match prediction " + shape_str(pred_probs.shape()));
    require(weight_bg > T(0) && weight_fg > T(0), "weighted_cross_entropy: weights must be > 0");
    const T floor_v = T(1e-12);
    const std::int64_t hw = static_cast<std::int64_t>(target.dim(0)) * target.dim(1);
    T loss = T(0);
    for (std::int64_t i = 0; i < hw; ++i) {
        const T t = target.data()[static_cast<std::size_t>(i)];
        require(t == T(0) || t == T(1), "weighted_cross_entropy: target must be binary");
        const bool fg = t == T(1);
        const T p = pred_probs.data()[static_cast<std::size_t>(fg ? hw + i : i)];
        loss -= (fg ? weight_fg : weight_bg) * std::log(std::max(p, floor_v));
    }
    loss /= static_cast<T>(hw);
    return Tensor<T>::make_op(
        {1}, {loss}, {pred_probs, target}, [hw, weight_bg, weight_fg, floor_v](auto& self) {
            auto& pp = *self.parents[0];
            const auto& tgt = self.parents[1]->data;
            if (!pp.requires_grad) return;
            const T g = self.grad[0] / static_cast<T>(hw);
            for (std::int64_t i = 0; i < hw; ++i) {
                const bool fg = tgt[static_cast<std::size_t>(i)] == T(1);
                const std::size_t idx = static_cast<std::size_t>(fg ? hw + i : i);
                const T p = pp.data[idx];
                if (p > floor_v) pp.grad[idx] -= g * (fg ? weight_fg : weight_bg) / p;
            }
        });
}

// -------------------- prototype-head primitives --------------------

// Subtract each vector's mean over axis 0 (the channel axis). Works for both
// [D,N] prototype bags and [D,H,W] feature maps.
template <typename T>
Tensor<T> center_channels(const Tensor<T>& x) {
    require(x.rank() >= 1, "center_channels: empty tensor");
    const std::int64_t d = x.dim(0);
    const std::int64_t cols = x.numel() / d;
    std::vector<T> out(x.data().size());
    for (std::int64_t c = 0; c < cols; ++c) {
        T m = T(0);
        for (std::int64_t j = 0; j < d; ++j) m += x.data()[static_cast<std::size_t>(j * cols + c)];
        m /= static_cast<T>(d);
        for (std::int64_t j = 0; j < d; ++j)
            out[static_cast<std::size_t>(j * cols + c)] =
                x.data()[static_cast<std::size_t>(j * cols + c)] - m;
    }
    return Tensor<T>::make_op(x.shape(), std::move(out), {x}, [d, cols](auto& self) {
        auto& px = *self.parents[0];
        for (std::int64_t c = 0; c < cols; ++c) {
            T m = T(0);
            for (std::int64_t j = 0; j < d; ++j) m += self.grad[static_cast<std::size_t>(j * cols + c)];
            m /= static_cast<T>(d);
            for (std::int64_t j = 0; j < d; ++j)
                px.grad[static_cast<std::size_t>(j * cols + c)] +=
                    self.grad[static_cast<std::size_t>(j * cols + c)] - m;
        }
    });
}

// Weighted average of feature columns: out[d] = sum_hw w*f / sum_hw w. The
// weights are data, not a differentiable input. An all-zero weight map
// yields the zero vector.
template <typename T>
Tensor<T> masked_mean(const Tensor<T>& feat, const Tensor<T>& weights) {
    require(feat.rank() == 3, "masked_mean: feat must be [D,H,W]");
    require(weights.rank() == 2 && weights.dim(0) == feat.dim(1) && weights.dim(1) == feat.dim(2),
            "masked_mean: weight shape " + shape_str(weights.shape()) + " does not match " +
                shape_str(feat.shape()));
    require(!weights.requires_grad(), "masked_mean: weights must not require grad");
    const int d = feat.dim(0);
    const std::int64_t hw = static_cast<std::int64_t>(feat.dim(1)) * feat.dim(2);
    T wsum = T(0);
    for (T v : weights.data()) wsum += v;
    const T denom = wsum > T(0) ? wsum : T(1);
    std::vector<T> out(static_cast<std::size_t>(d), T(0));
    for (int j = 0; j < d; ++j) {
        T acc = T(0);
        for (std::int64_t i = 0; i < hw; ++i)
            acc += feat.data()[static_cast<std::size_t>(j * hw + i)] *
                   weights.data()[static_cast<std::size_t>(i)];
        out[static_cast<std::size_t>(j)] = acc / denom;
    }
    return Tensor<T>::make_op({d}, std::move(out), {feat, weights}, [d, hw, denom](auto& self) {
        auto& pf = *self.parents[0];
        const auto& wdat = self.parents[1]->data;
        if (!pf.requires_grad) return;
        for (int j = 0; j < d; ++j) {
            const T g = self.grad[static_cast<std::size_t>(j)] / denom;
            for (std::int64_t i = 0; i < hw; ++i)
                pf.grad[static_cast<std::size_t>(j * hw + i)] += g * wdat[static_cast<std::size_t>(i)];
        }
    });
}

// Gather feature columns at flat pixel indices: out[d,j] = feat[d, idx[j]].
template <typename T>
Tensor<T> gather_pixels(const Tensor<T>& feat, const std::vector<int>& indices) {
    require(feat.rank() == 3, "gather_pixels: feat must be [D,H,W]");
    require(!indices.empty(), "gather_pixels: no indices");
    const int d = feat.dim(0);
    const std::int64_t hw = static_cast<std::int64_t>(feat.dim(1)) * feat.dim(2);
    for (int idx : indices)
        require(idx >= 0 && idx < hw, "gather_pixels: index out of range");
    const int n = static_cast<int>(indices.size());
    std::vector<T> out(static_cast<std::size_t>(d) * static_cast<std::size_t>(n));
    for (int j = 0; j < d; ++j)
        for (int p = 0; p < n; ++p)
            out[static_cast<std::size_t>(j * n + p)] =
                feat.data()[static_cast<std::size_t>(j * hw + indices[static_cast<std::size_t>(p)])];
    return Tensor<T>::make_op({d, n}, std::move(out), {feat}, [d, hw, n, indices](auto& self) {
        auto& pf = *self.parents[0];
        for (int j = 0; j < d; ++j)
            for (int p = 0; p < n; ++p)
                pf.grad[static_cast<std::size_t>(j * hw + indices[static_cast<std::size_t>(p)])] +=
                    self.grad[static_cast<std::size_t>(j * n + p)];
    });
}

// Concatenate two [D,*] matrices along the column axis.
template <typename T>
Tensor<T> concat_cols(const Tensor<T>& a, const Tensor<T>& b) {
    require(a.rank() == 2 && b.rank() == 2 && a.dim(0) == b.dim(0),
            "concat_cols: expects [D,N] and [D,M], got " + shape_str(a.shape()) + " and " +
                shape_str(b.shape()));
    const int d = a.dim(0), n = a.dim(1), m = b.dim(1);
    std::vector<T> out(static_cast<std::size_t>(d) * static_cast<std::size_t>(n + m));
    for (int j = 0; j < d; ++j) {
        for (int c = 0; c < n; ++c)
            out[static_cast<std::size_t>(j * (n + m) + c)] = a.data()[static_cast<std::size_t>(j * n + c)];
        for (int c = 0; c < m; ++c)
            out[static_cast<std::size_t>(j * (n + m) + n + c)] = b.data()[static_cast<std::size_t>(j * m + c)];
    }
    return Tensor<T>::make_op({d, n + m}, std::move(out), {a, b}, [d, n, m](auto& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        for (int j = 0; j < d; ++j) {
            if (pa.requires_grad)
                for (int c = 0; c < n; ++c)
                    pa.grad[static_cast<std::size_t>(j * n + c)] +=
                        self.grad[static_cast<std::size_t>(j * (n + m) + c)];
            if (pb.requires_grad)
                for (int c = 0; c < m; ++c)
                    pb.grad[static_cast<std::size_t>(j * m + c)] +=
                        self.grad[static_cast<std::size_t>(j * (n + m) + n + c)];
        }
    });
}

// Norm floor for the cosine denominators. Below it the vector carries no
// usable direction (dead relu pixels, constant channels) and the unclamped
// quotient would have an unbounded gradient cliff at the origin; clamping
// leaves every healthy vector's value untouched.
constexpr double kCosineNormFloor = 1e-2;

// Similarity between every query pixel and every prototype column.
// cosine=true: dot(q,p) / (max(|q|,floor) * max(|p|,floor) + 1e-8);
// cosine=false: raw dot product.
template <typename T>
Tensor<T> bag_correlation(const Tensor<T>& query, const Tensor<T>& bag, bool cosine) {
    require(query.rank() == 3, "bag_correlation: query must be [D,H,W]");
    require(bag.rank() == 2, "bag_correlation: bag must be [D,N]");
    require(query.dim(0) == bag.dim(0),
            "bag_correlation: channel dims differ, " + std::to_string(query.dim(0)) + " vs " +
                std::to_string(bag.dim(0)));
    constexpr T kEps = T(1e-8);
    const T floor_v = static_cast<T>(kCosineNormFloor);
    const int d = query.dim(0), h = query.dim(1), w = query.dim(2), n = bag.dim(1);
    const std::int64_t hw = static_cast<std::int64_t>(h) * w;

    std::vector<T> nq, nb;
    if (cosine) {
        nq.assign(static_cast<std::size_t>(hw), T(0));
        nb.assign(static_cast<std::size_t>(n), T(0));
        for (int j = 0; j < d; ++j)
            for (std::int64_t p = 0; p < hw; ++p) {
                const T v = query.data()[static_cast<std::size_t>(j * hw + p)];
                nq[static_cast<std::size_t>(p)] += v * v;
            }
        for (auto& v : nq) v = std::sqrt(v);
        for (int j = 0; j < d; ++j)
            for (int b = 0; b < n; ++b) {
                const T v = bag.data()[static_cast<std::size_t>(j * n + b)];
                nb[static_cast<std::size_t>(b)] += v * v;
            }
        for (auto& v : nb) v = std::sqrt(v);
    }

    std::vector<T> out(static_cast<std::size_t>(n) * static_cast<std::size_t>(hw), T(0));
    for (int b = 0; b < n; ++b)
        for (std::int64_t p = 0; p < hw; ++p) {
            T s = T(0);
            for (int j = 0; j < d; ++j)
                s += query.data()[static_cast<std::size_t>(j * hw + p)] *
                     bag.data()[static_cast<std::size_t>(j * n + b)];
            out[static_cast<std::size_t>(b * hw + p)] =
                cosine ? s / (std::max(nq[static_cast<std::size_t>(p)], floor_v) *
                                  std::max(nb[static_cast<std::size_t>(b)], floor_v) +
                              kEps)
                       : s;
        }

    auto bw = [cosine, d, hw, n, nq, nb, floor_v](auto& self) {
        auto& pq = *self.parents[0];
        auto& pb = *self.parents[1];
        const auto& qdat = pq.data;
        const auto& bdat = pb.data;
        if (!cosine) {
            for (int b = 0; b < n; ++b)
                for (std::int64_t p = 0; p < hw; ++p) {
                    const T g = self.grad[static_cast<std::size_t>(b * hw + p)];
                    if (g == T(0)) continue;
                    for (int j = 0; j < d; ++j) {
                        if (pq.requires_grad)
                            pq.grad[static_cast<std::size_t>(j * hw + p)] +=
                                g * bdat[static_cast<std::size_t>(j * n + b)];
                        if (pb.requires_grad)
                            pb.grad[static_cast<std::size_t>(j * n + b)] +=
                                g * qdat[static_cast<std::size_t>(j * hw + p)];
                    }
                }
            return;
        }
        constexpr T kEpsB = T(1e-8);
        for (int b = 0; b < n; ++b)
            for (std::int64_t p = 0; p < hw; ++p) {
                const std::size_t oidx = static_cast<std::size_t>(b * hw + p);
                const T g = self.grad[oidx];
                if (g == T(0)) continue;
                const T nqv = nq[static_cast<std::size_t>(p)];
                const T nbv = nb[static_cast<std::size_t>(b)];
                const T nqc = std::max(nqv, floor_v);
                const T nbc = std::max(nbv, floor_v);
                const T den = nqc * nbc + kEpsB;
                const T s = self.data[oidx] * den;
                // the clamp has zero slope below the floor
                const T cq = nqv > floor_v ? g * s * nbc / (nqv * den * den) : T(0);
                const T cb = nbv > floor_v ? g * s * nqc / (nbv * den * den) : T(0);
                for (int j = 0; j < d; ++j) {
                    const std::size_t qi = static_cast<std::size_t>(j * hw + p);
                    const std::size_t bi = static_cast<std::size_t>(j * n + b);
                    if (pq.requires_grad) pq.grad[qi] += g * bdat[bi] / den - cq * qdat[qi];
                    if (pb.requires_grad) pb.grad[bi] += g * qdat[qi] / den - cb * bdat[bi];
                }
            }
    };
    return Tensor<T>::make_op({n, h, w}, std::move(out), {query, bag}, std::move(bw));
}

// Per-pixel convex combination of prototypes: out[d,h,w] = sum_j probs[j,h,w] * bag[d,j].
template <typename T>
Tensor<T> bag_aggregate(const Tensor<T>& bag, const Tensor<T>& probs) {
    require(bag.rank() == 2, "bag_aggregate: bag must be [D,N]");
    require(probs.rank() == 3 && probs.dim(0) == bag.dim(1),
            "bag_aggregate: probs must be [N,H,W] with N=" + std::to_string(bag.dim(1)));
    const int d = bag.dim(0), n = bag.dim(1), h = probs.dim(1), w = probs.dim(2);
    const std::int64_t hw = static_cast<std::int64_t>(h) * w;
    std::vector<T> out(static_cast<std::size_t>(d) * static_cast<std::size_t>(hw), T(0));
    for (int b = 0; b < n; ++b)
        for (std::int64_t p = 0; p < hw; ++p) {
            const T pr = probs.data()[static_cast<std::size_t>(b * hw + p)];
            if (pr == T(0)) continue;
            for (int j = 0; j < d; ++j)
                out[static_cast<std::size_t>(j * hw + p)] +=
                    pr * bag.data()[static_cast<std::size_t>(j * n + b)];
        }
    return Tensor<T>::make_op({d, h, w}, std::move(out), {bag, probs}, [d, n, hw](auto& self) {
        auto& pb = *self.parents[0];
        auto& pp = *self.parents[1];
        for (int b = 0; b < n; ++b)
            for (std::int64_t p = 0; p < hw; ++p) {
                const T pr = pp.data[static_cast<std::size_t>(b * hw + p)];
                T dot = T(0);
                for (int j = 0; j < d; ++j) {
                    const T g = self.grad[static_cast<std::size_t>(j * hw + p)];
                    if (pb.requires_grad)
                        pb.grad[static_cast<std::size_t>(j * n + b)] += g * pr;
                    dot += g * pb.data[static_cast<std::size_t>(j * n + b)];
                }
                if (pp.requires_grad) pp.grad[static_cast<std::size_t>(b * hw + p)] += dot;
            }
    });
}

// Per-pixel similarity between two [D,H,W] maps (used to score the
// aggregated prototype against the query feature).
template <typename T>
Tensor<T> pixel_similarity(const Tensor<T>& a, const Tensor<T>& b, bool cosine) {
    detail::check_same_shape(a, b, "pixel_similarity");
    require(a.rank() == 3, "pixel_similarity: inputs must be [D,H,W]");
    constexpr T kEps = T(1e-8);
    const T floor_v = static_cast<T>(kCosineNormFloor);
    const int d = a.dim(0), h = a.dim(1), w = a.dim(2);
    const std::int64_t hw = static_cast<std::int64_t>(h) * w;
    std::vector<T> na, nb, out(static_cast<std::size_t>(hw), T(0));
    if (cosine) {
        na.assign(static_cast<std::size_t>(hw), T(0));
        nb.assign(static_cast<std::size_t>(hw), T(0));
    }
    for (std::int64_t p = 0; p < hw; ++p) {
        T s = T(0), sa = T(0), sb = T(0);
        for (int j = 0; j < d; ++j) {
            const T av = a.data()[static_cast<std::size_t>(j * hw + p)];
            const T bv = b.data()[static_cast<std::size_t>(j * hw + p)];
            s += av * bv;
            sa += av * av;
            sb += bv * bv;
        }
        if (cosine) {
            na[static_cast<std::size_t>(p)] = std::sqrt(sa);
            nb[static_cast<std::size_t>(p)] = std::sqrt(sb);
            out[static_cast<std::size_t>(p)] =
                s / (std::max(na[static_cast<std::size_t>(p)], floor_v) *
                         std::max(nb[static_cast<std::size_t>(p)], floor_v) +
                     kEps);
        } else {
            out[static_cast<std::size_t>(p)] = s;
        }
    }
    return Tensor<T>::make_op({h, w}, std::move(out), {a, b},
                              [cosine, d, hw, na, nb, floor_v](auto& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        constexpr T kEpsB = T(1e-8);
        for (std::int64_t p = 0; p < hw; ++p) {
            const T g = self.grad[static_cast<std::size_t>(p)];
            if (g == T(0)) continue;
            if (!cosine) {
                for (int j = 0; j < d; ++j) {
                    const std::size_t idx = static_cast<std::size_t>(j * hw + p);
                    if (pa.requires_grad) pa.grad[idx] += g * pb.data[idx];
                    if (pb.requires_grad) pb.grad[idx] += g * pa.data[idx];
                }
                continue;
            }
            const T nav = na[static_cast<std::size_t>(p)];
            const T nbv = nb[static_cast<std::size_t>(p)];
            const T nac = std::max(nav, floor_v);
            const T nbc = std::max(nbv, floor_v);
            const T den = nac * nbc + kEpsB;
            const T s = self.data[static_cast<std::size_t>(p)] * den;
            const T ca = nav > floor_v ? g * s * nbc / (nav * den * den) : T(0);
            const T cb = nbv > floor_v ? g * s * nac / (nbv * den * den) : T(0);
            for (int j = 0; j < d; ++j) {
                const std::size_t idx = static_cast<std::size_t>(j * hw + p);
                if (pa.requires_grad) pa.grad[idx] += g * pb.data[idx] / den - ca * pa.data[idx];
                if (pb.requires_grad) pb.grad[idx] += g * pa.data[idx] / den - cb * pb.data[idx];
            }
        }
    });
}

// Per-pixel softmax over axis 0 restricted to the k highest entries; the
// rest get probability exactly 0 (and zero gradient). Ties break toward the
// lower index. k >= N reduces to softmax(x, 0, t).
template <typename T>
Tensor<T> softmax_topk(const Tensor<T>& x, T temperature, int k) {
    require(x.rank() == 3, "softmax_topk: input must be [N,H,W]");
    require(temperature > T(0), "softmax_topk: temperature must be > 0");
    require(k >= 1, "softmax_topk: k must be >= 1");
    const int n = x.dim(0);
    if (k >= n) return softmax(x, 0, temperature);
    const std::int64_t hw = static_cast<std::int64_t>(x.dim(1)) * x.dim(2);

    std::vector<T> out(x.data().size(), T(0));
    std::vector<std::int32_t> kept(static_cast<std::size_t>(hw) * static_cast<std::size_t>(k));
    std::vector<std::int32_t> idx(static_cast<std::size_t>(n));
    for (std::int64_t p = 0; p < hw; ++p) {
        for (int j = 0; j < n; ++j) idx[static_cast<std::size_t>(j)] = j;
        std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](std::int32_t l, std::int32_t r) {
            const T lv = x.data()[static_cast<std::size_t>(l * hw + p)];
            const T rv = x.data()[static_cast<std::size_t>(r * hw + p)];
            if (lv != rv) return lv > rv;
            return l < r;
        });
        T m = x.data()[static_cast<std::size_t>(idx[0] * hw + p)];
        T denom = T(0);
        for (int j = 0; j < k; ++j) {
            const std::int32_t sel = idx[static_cast<std::size_t>(j)];
            kept[static_cast<std::size_t>(p * k + j)] = sel;
            const T e = std::exp((x.data()[static_cast<std::size_t>(sel * hw + p)] - m) / temperature);
            out[static_cast<std::size_t>(sel * hw + p)] = e;
            denom += e;
        }
        for (int j = 0; j < k; ++j) {
            const std::int32_t sel = kept[static_cast<std::size_t>(p * k + j)];
            out[static_cast<std::size_t>(sel * hw + p)] /= denom;
        }
    }
    return Tensor<T>::make_op(x.shape(), std::move(out), {x},
                              [hw, k, temperature, kept](auto& self) {
                                  auto& px = *self.parents[0];
                                  for (std::int64_t p = 0; p < hw; ++p) {
                                      T dot = T(0);
                                      for (int j = 0; j < k; ++j) {
                                          const std::int32_t sel = kept[static_cast<std::size_t>(p * k + j)];
                                          const std::size_t idx2 = static_cast<std::size_t>(sel * hw + p);
                                          dot += self.grad[idx2] * self.data[idx2];
                                      }
                                      for (int j = 0; j < k; ++j) {
                                          const std::int32_t sel = kept[static_cast<std::size_t>(p * k + j)];
                                          const std::size_t idx2 = static_cast<std::size_t>(sel * hw + p);
                                          px.grad[idx2] +=
                                              self.data[idx2] * (self.grad[idx2] - dot) / temperature;
                                      }
                                  }
                              });
}

}  // namespace cowpro
