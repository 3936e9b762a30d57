#include "hafno/core/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hafno::ops {

namespace {

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

void require_same_shape(const Var& a, const Var& b, const char* op) {
    if (a->shape() != b->shape()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a->shape()) + " vs " +
                                    shape_str(b->shape()));
    }
}

void require_field(const Var& x, const char* op) {
    if (x->value.rank() != 3) {
        throw std::invalid_argument(std::string(op) + ": expected [C, H, W], got " + shape_str(x->shape()));
    }
}

double gelu_value(double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x))); }

double gelu_derivative(double x) {
    const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}

double sigmoid_value(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Accumulate into the parent's gradient only when it takes one.
template <class F>
void if_grad(Node& self, std::size_t i, F&& f) {
    Node& p = *self.parents[i];
    if (p.requires_grad) f(p.grad_buffer());
}

}  // namespace

Var elementwise(Elementwise kind, const Var& a, const Var& b) {
    switch (kind) {
        case Elementwise::add: return add(a, b);
        case Elementwise::sub: return sub(a, b);
        case Elementwise::mul: return mul(a, b);
        case Elementwise::gelu: return gelu(a);
        case Elementwise::sigmoid: return sigmoid(a);
        case Elementwise::scale:
            if (b->value.size() != 1) throw std::invalid_argument("scale: factor must be a scalar");
            return scale(a, b->value[0]);
    }
    throw std::invalid_argument("elementwise: unknown kind");
}

Var elementwise(Elementwise kind, const Var& a, double b) {
    switch (kind) {
        case Elementwise::add: return add(a, b);
        case Elementwise::sub: return add(a, -b);
        case Elementwise::mul:
        case Elementwise::scale: return scale(a, b);
        case Elementwise::gelu: return gelu(a);
        case Elementwise::sigmoid: return sigmoid(a);
    }
    throw std::invalid_argument("elementwise: unknown kind");
}

Var add(const Var& a, const Var& b) {
    require_same_shape(a, b, "add");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b->value[i];
    return make_result(std::move(out), {a, b}, "add", [](Node& self) {
        for (std::size_t k = 0; k < 2; ++k)
            if_grad(self, k, [&](Tensor& g) {
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
            });
    });
}

Var sub(const Var& a, const Var& b) {
    require_same_shape(a, b, "sub");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b->value[i];
    return make_result(std::move(out), {a, b}, "sub", [](Node& self) {
        if_grad(self, 0, [&](Tensor& g) {
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        });
        if_grad(self, 1, [&](Tensor& g) {
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
        });
    });
}

Var mul(const Var& a, const Var& b) {
    require_same_shape(a, b, "mul");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b->value[i];
    return make_result(std::move(out), {a, b}, "mul", [](Node& self) {
        const Tensor& av = self.parents[0]->value;
        const Tensor& bv = self.parents[1]->value;
        if_grad(self, 0, [&](Tensor& g) {
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bv[i];
        });
        if_grad(self, 1, [&](Tensor& g) {
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * av[i];
        });
    });
}

Var add(const Var& a, double b) {
    Tensor out = a->value;
    for (double& v : out.data()) v += b;
    return make_result(std::move(out), {a}, "add_scalar", [](Node& self) {
        if_grad(self, 0, [&](Tensor& g) {
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        });
    });
}

Var scale(const Var& a, double s) {
    Tensor out = a->value;
    for (double& v : out.data()) v *= s;
    return make_result(std::move(out), {a}, "scale", [s](Node& self) {
        if_grad(self, 0, [&](Tensor& g) {
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * self.grad[i];
        });
    });
}

Var gelu(const Var& a) {
    Tensor out(a->shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = gelu_value(a->value[i]);
    return make_result(std::move(out), {a}, "gelu", [](Node& self) {
        const Tensor& x = self.parents[0]->value;
        if_grad(self, 0, [&](Tensor& g) {
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * gelu_derivative(x[i]);
        });
    });
}

Var sigmoid(const Var& a) {
    Tensor out(a->shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid_value(a->value[i]);
    return make_result(std::move(out), {a}, "sigmoid", [](Node& self) {
        const Tensor& y = self.value;
        if_grad(self, 0, [&](Tensor& g) {
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * y[i] * (1.0 - y[i]);
        });
    });
}

Var mul_broadcast(const Var& x, const Var& map) {
    require_field(x, "mul_broadcast");
    require_field(map, "mul_broadcast");
    const std::size_t C = x->value.dim(0), H = x->value.dim(1), W = x->value.dim(2);
    const std::size_t mc = map->value.dim(0), mh = map->value.dim(1), mw = map->value.dim(2);
    if ((mc != C && mc != 1) || (mh != H && mh != 1) || (mw != W && mw != 1)) {
        throw std::invalid_argument("mul_broadcast: map " + shape_str(map->shape()) + " does not broadcast to " +
                                    shape_str(x->shape()));
    }
    auto midx = [=](std::size_t c, std::size_t h, std::size_t w) {
        return ((mc == 1 ? 0 : c) * mh + (mh == 1 ? 0 : h)) * mw + (mw == 1 ? 0 : w);
    };
    Tensor out(x->shape());
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t h = 0; h < H; ++h)
            for (std::size_t w = 0; w < W; ++w) out.at(c, h, w) = x->value.at(c, h, w) * map->value[midx(c, h, w)];
    return make_result(std::move(out), {x, map}, "mul_broadcast", [=](Node& self) {
        const Tensor& xv = self.parents[0]->value;
        const Tensor& mv = self.parents[1]->value;
        if_grad(self, 0, [&](Tensor& g) {
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t h = 0; h < H; ++h)
                    for (std::size_t w = 0; w < W; ++w) g.at(c, h, w) += self.grad.at(c, h, w) * mv[midx(c, h, w)];
        });
        if_grad(self, 1, [&](Tensor& g) {
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t h = 0; h < H; ++h)
                    for (std::size_t w = 0; w < W; ++w) g[midx(c, h, w)] += self.grad.at(c, h, w) * xv.at(c, h, w);
        });
    });
}

Var sum(const Var& a) {
    double s = 0.0;
    for (double v : a->value.data()) s += v;
    return make_result(Tensor::scalar(s), {a}, "sum", [](Node& self) {
        const double g0 = self.grad[0];
        if_grad(self, 0, [&](Tensor& g) {
            for (double& v : g.data()) v += g0;
        });
    });
}

Var dot(const Var& a, const Tensor& weights) {
    if (a->value.size() != weights.size()) {
        throw std::invalid_argument("dot: size mismatch " + shape_str(a->shape()) + " vs " + shape_str(weights.shape()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) s += a->value[i] * weights[i];
    return make_result(Tensor::scalar(s), {a}, "dot", [weights](Node& self) {
        const double g0 = self.grad[0];
        if_grad(self, 0, [&](Tensor& g) {
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += g0 * weights[i];
        });
    });
}

Var pointwise_linear(const Var& x, const Var& weight, const Var& bias) {
    require_field(x, "pointwise_linear");
    if (weight->value.rank() != 2 || weight->value.dim(1) != x->value.dim(0)) {
        throw std::invalid_argument("pointwise_linear: weight " + shape_str(weight->shape()) +
                                    " does not match input channels of " + shape_str(x->shape()));
    }
    const std::size_t Cin = weight->value.dim(1), Cout = weight->value.dim(0);
    const std::size_t H = x->value.dim(1), W = x->value.dim(2), N = H * W;
    if (bias && bias->value.size() != Cout) {
        throw std::invalid_argument("pointwise_linear: bias " + shape_str(bias->shape()) + " for " +
                                    std::to_string(Cout) + " output channels");
    }
    Tensor out(Shape{Cout, H, W});
    const double* xv = x->value.data().data();
    const double* wv = weight->value.data().data();
    for (std::size_t o = 0; o < Cout; ++o) {
        double* dst = out.data().data() + o * N;
        const double b = bias ? bias->value[o] : 0.0;
        for (std::size_t n = 0; n < N; ++n) dst[n] = b;
        for (std::size_t k = 0; k < Cin; ++k) {
            const double wk = wv[o * Cin + k];
            const double* src = xv + k * N;
            for (std::size_t n = 0; n < N; ++n) dst[n] += wk * src[n];
        }
    }
    std::vector<Var> parents{x, weight};
    if (bias) parents.push_back(bias);
    return make_result(std::move(out), std::move(parents), "pointwise_linear", [=](Node& self) {
        const double* g = self.grad.data().data();
        const double* xs = self.parents[0]->value.data().data();
        const double* ws = self.parents[1]->value.data().data();
        if_grad(self, 0, [&](Tensor& gx) {
            for (std::size_t o = 0; o < Cout; ++o)
                for (std::size_t k = 0; k < Cin; ++k) {
                    const double wk = ws[o * Cin + k];
                    double* dst = gx.data().data() + k * N;
                    const double* src = g + o * N;
                    for (std::size_t n = 0; n < N; ++n) dst[n] += wk * src[n];
                }
        });
        if_grad(self, 1, [&](Tensor& gw) {
            for (std::size_t o = 0; o < Cout; ++o)
                for (std::size_t k = 0; k < Cin; ++k) {
                    double s = 0.0;
                    const double* a = g + o * N;
                    const double* b = xs + k * N;
                    for (std::size_t n = 0; n < N; ++n) s += a[n] * b[n];
                    gw[o * Cin + k] += s;
                }
        });
        if (self.parents.size() > 2) {
            if_grad(self, 2, [&](Tensor& gb) {
                for (std::size_t o = 0; o < Cout; ++o) {
                    double s = 0.0;
                    for (std::size_t n = 0; n < N; ++n) s += g[o * N + n];
                    gb[o] += s;
                }
            });
        }
    });
}

namespace {

// Circularly padded copy of x [C,H,W] with halo p on each side.
std::vector<double> pad_circular(const Tensor& x, std::size_t p) {
    const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
    const std::size_t Hp = H + 2 * p, Wp = W + 2 * p;
    std::vector<double> out(C * Hp * Wp);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < Hp; ++i) {
            const std::size_t h = (i + H - p % H) % H;
            for (std::size_t j = 0; j < Wp; ++j) {
                const std::size_t w = (j + W - p % W) % W;
                out[(c * Hp + i) * Wp + j] = x.at(c, h, w);
            }
        }
    return out;
}

}  // namespace

Var conv2d_circular(const Var& x, const Var& kernel, const Var& bias) {
    require_field(x, "conv2d_circular");
    const Tensor& K = kernel->value;
    if (K.rank() != 4 || K.dim(2) != K.dim(3)) {
        throw std::invalid_argument("conv2d_circular: kernel must be [C_out, C_in, k, k], got " + shape_str(K.shape()));
    }
    const std::size_t Cout = K.dim(0), Cin = K.dim(1), k = K.dim(2);
    const std::size_t H = x->value.dim(1), W = x->value.dim(2);
    if (k % 2 == 0) throw std::invalid_argument("conv2d_circular: kernel size " + std::to_string(k) + " is even");
    if (Cin != x->value.dim(0)) {
        throw std::invalid_argument("conv2d_circular: kernel " + shape_str(K.shape()) + " vs input " +
                                    shape_str(x->shape()));
    }
    if (k > std::min(H, W)) {
        throw std::invalid_argument("conv2d_circular: kernel size " + std::to_string(k) + " exceeds grid " +
                                    shape_str(x->shape()));
    }
    if (bias && bias->value.size() != Cout) {
        throw std::invalid_argument("conv2d_circular: bias " + shape_str(bias->shape()));
    }
    const std::size_t p = k / 2, Hp = H + 2 * p, Wp = W + 2 * p;
    std::vector<double> P = pad_circular(x->value, p);
    Tensor out(Shape{Cout, H, W});
    const double* kv = K.data().data();
    for (std::size_t o = 0; o < Cout; ++o) {
        double* dst0 = out.data().data() + o * H * W;
        const double b = bias ? bias->value[o] : 0.0;
        for (std::size_t n = 0; n < H * W; ++n) dst0[n] = b;
        for (std::size_t c = 0; c < Cin; ++c)
            for (std::size_t i = 0; i < k; ++i)
                for (std::size_t j = 0; j < k; ++j) {
                    const double kk = kv[((o * Cin + c) * k + i) * k + j];
                    for (std::size_t h = 0; h < H; ++h) {
                        const double* src = P.data() + (c * Hp + h + i) * Wp + j;
                        double* dst = dst0 + h * W;
                        for (std::size_t w = 0; w < W; ++w) dst[w] += kk * src[w];
                    }
                }
    }
    std::vector<Var> parents{x, kernel};
    if (bias) parents.push_back(bias);
    return make_result(std::move(out), std::move(parents), "conv2d_circular",
                       [=, P = std::move(P)](Node& self) {
                           const double* g = self.grad.data().data();
                           const double* ks = self.parents[1]->value.data().data();
                           if_grad(self, 0, [&](Tensor& gx) {
                               std::vector<double> gP(Cin * Hp * Wp, 0.0);
                               for (std::size_t o = 0; o < Cout; ++o)
                                   for (std::size_t c = 0; c < Cin; ++c)
                                       for (std::size_t i = 0; i < k; ++i)
                                           for (std::size_t j = 0; j < k; ++j) {
                                               const double kk = ks[((o * Cin + c) * k + i) * k + j];
                                               for (std::size_t h = 0; h < H; ++h) {
                                                   double* dst = gP.data() + (c * Hp + h + i) * Wp + j;
                                                   const double* src = g + (o * H + h) * W;
                                                   for (std::size_t w = 0; w < W; ++w) dst[w] += kk * src[w];
                                               }
                                           }
                               for (std::size_t c = 0; c < Cin; ++c)
                                   for (std::size_t i = 0; i < Hp; ++i) {
                                       const std::size_t h = (i + H - p % H) % H;
                                       for (std::size_t j = 0; j < Wp; ++j) {
                                           const std::size_t w = (j + W - p % W) % W;
                                           gx.at(c, h, w) += gP[(c * Hp + i) * Wp + j];
                                       }
                                   }
                           });
                           if_grad(self, 1, [&](Tensor& gk) {
                               for (std::size_t o = 0; o < Cout; ++o)
                                   for (std::size_t c = 0; c < Cin; ++c)
                                       for (std::size_t i = 0; i < k; ++i)
                                           for (std::size_t j = 0; j < k; ++j) {
                                               double s = 0.0;
                                               for (std::size_t h = 0; h < H; ++h) {
                                                   const double* a = g + (o * H + h) * W;
                                                   const double* b = P.data() + (c * Hp + h + i) * Wp + j;
                                                   for (std::size_t w = 0; w < W; ++w) s += a[w] * b[w];
                                               }
                                               gk[((o * Cin + c) * k + i) * k + j] += s;
                                           }
                           });
                           if (self.parents.size() > 2) {
                               if_grad(self, 2, [&](Tensor& gb) {
                                   for (std::size_t o = 0; o < Cout; ++o) {
                                       double s = 0.0;
                                       for (std::size_t n = 0; n < H * W; ++n) s += g[o * H * W + n];
                                       gb[o] += s;
                                   }
                               });
                           }
                       });
}

Var maxpool2(const Var& x) {
    require_field(x, "maxpool2");
    const std::size_t C = x->value.dim(0), H = x->value.dim(1), W = x->value.dim(2);
    if (H % 2 || W % 2) {
        throw std::invalid_argument("maxpool2: odd spatial dims " + shape_str(x->shape()) + "; pad first");
    }
    const std::size_t h2 = H / 2, w2 = W / 2;
    Tensor out(Shape{C, h2, w2});
    std::vector<std::size_t> arg(out.size());
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < h2; ++i)
            for (std::size_t j = 0; j < w2; ++j) {
                std::size_t best = (c * H + 2 * i) * W + 2 * j;
                for (std::size_t di = 0; di < 2; ++di)
                    for (std::size_t dj = 0; dj < 2; ++dj) {
                        const std::size_t idx = (c * H + 2 * i + di) * W + 2 * j + dj;
                        if (x->value[idx] > x->value[best]) best = idx;
                    }
                const std::size_t o = (c * h2 + i) * w2 + j;
                out[o] = x->value[best];
                arg[o] = best;
            }
    return make_result(std::move(out), {x}, "maxpool2", [arg = std::move(arg)](Node& self) {
        if_grad(self, 0, [&](Tensor& g) {
            for (std::size_t o = 0; o < arg.size(); ++o) g[arg[o]] += self.grad[o];
        });
    });
}

namespace {

// 1D factor-2 upsampling along one axis: out[2i] = .75 x[i] + .25 x[i-1],
// out[2i+1] = .75 x[i] + .25 x[i+1], indices periodic.
// `outer` independent lines of length n, stride `stride` between line elements.
void upsample_axis(const double* in, double* out, std::size_t lines_outer, std::size_t n, std::size_t inner) {
    // in: [outer, n, inner], out: [outer, 2n, inner]
    for (std::size_t a = 0; a < lines_outer; ++a)
        for (std::size_t i = 0; i < n; ++i) {
            const double* xi = in + (a * n + i) * inner;
            const double* xm = in + (a * n + (i + n - 1) % n) * inner;
            const double* xp = in + (a * n + (i + 1) % n) * inner;
            double* o0 = out + (a * 2 * n + 2 * i) * inner;
            double* o1 = o0 + inner;
            for (std::size_t b = 0; b < inner; ++b) {
                o0[b] = 0.75 * xi[b] + 0.25 * xm[b];
                o1[b] = 0.75 * xi[b] + 0.25 * xp[b];
            }
        }
}

void upsample_axis_adjoint(const double* gout, double* gin, std::size_t lines_outer, std::size_t n,
                           std::size_t inner) {
    for (std::size_t a = 0; a < lines_outer; ++a)
        for (std::size_t i = 0; i < n; ++i) {
            double* gi = gin + (a * n + i) * inner;
            double* gm = gin + (a * n + (i + n - 1) % n) * inner;
            double* gp = gin + (a * n + (i + 1) % n) * inner;
            const double* o0 = gout + (a * 2 * n + 2 * i) * inner;
            const double* o1 = o0 + inner;
            for (std::size_t b = 0; b < inner; ++b) {
                gi[b] += 0.75 * (o0[b] + o1[b]);
                gm[b] += 0.25 * o0[b];
                gp[b] += 0.25 * o1[b];
            }
        }
}

}  // namespace

Var bilinear_upsample2(const Var& x) {
    require_field(x, "bilinear_upsample2");
    const std::size_t C = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
    if (h < 2 || w < 2) throw std::invalid_argument("bilinear_upsample2: grid " + shape_str(x->shape()) + " below 2x2");
    std::vector<double> mid(C * 2 * h * w);
    upsample_axis(x->value.data().data(), mid.data(), C, h, w);
    Tensor out(Shape{C, 2 * h, 2 * w});
    upsample_axis(mid.data(), out.data().data(), C * 2 * h, w, 1);
    return make_result(std::move(out), {x}, "bilinear_upsample2", [=](Node& self) {
        if_grad(self, 0, [&](Tensor& g) {
            std::vector<double> gmid(C * 2 * h * w, 0.0);
            upsample_axis_adjoint(self.grad.data().data(), gmid.data(), C * 2 * h, w, 1);
            upsample_axis_adjoint(gmid.data(), g.data().data(), C, h, w);
        });
    });
}

Var concat_channels(const Var& a, const Var& b) {
    require_field(a, "concat_channels");
    require_field(b, "concat_channels");
    if (a->value.dim(1) != b->value.dim(1) || a->value.dim(2) != b->value.dim(2)) {
        throw std::invalid_argument("concat_channels: spatial mismatch " + shape_str(a->shape()) + " vs " +
                                    shape_str(b->shape()));
    }
    const std::size_t na = a->value.size();
    Tensor out(Shape{a->value.dim(0) + b->value.dim(0), a->value.dim(1), a->value.dim(2)});
    std::copy(a->value.data().begin(), a->value.data().end(), out.data().begin());
    std::copy(b->value.data().begin(), b->value.data().end(), out.data().begin() + static_cast<long>(na));
    return make_result(std::move(out), {a, b}, "concat_channels", [na](Node& self) {
        if_grad(self, 0, [&](Tensor& g) {
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        });
        if_grad(self, 1, [&](Tensor& g) {
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[na + i];
        });
    });
}

Var global_avg_pool(const Var& x) {
    require_field(x, "global_avg_pool");
    const std::size_t C = x->value.dim(0), N = x->value.dim(1) * x->value.dim(2);
    Tensor out(Shape{C, 1, 1});
    for (std::size_t c = 0; c < C; ++c) {
        double s = 0.0;
        for (std::size_t n = 0; n < N; ++n) s += x->value[c * N + n];
        out[c] = s / static_cast<double>(N);
    }
    return make_result(std::move(out), {x}, "global_avg_pool", [C, N](Node& self) {
        if_grad(self, 0, [&](Tensor& g) {
            for (std::size_t c = 0; c < C; ++c) {
                const double gc = self.grad[c] / static_cast<double>(N);
                for (std::size_t n = 0; n < N; ++n) g[c * N + n] += gc;
            }
        });
    });
}

Var global_max_pool(const Var& x) {
    require_field(x, "global_max_pool");
    const std::size_t C = x->value.dim(0), N = x->value.dim(1) * x->value.dim(2);
    Tensor out(Shape{C, 1, 1});
    std::vector<std::size_t> arg(C);
    for (std::size_t c = 0; c < C; ++c) {
        std::size_t best = c * N;
        for (std::size_t n = 1; n < N; ++n)
            if (x->value[c * N + n] > x->value[best]) best = c * N + n;
        arg[c] = best;
        out[c] = x->value[best];
    }
    return make_result(std::move(out), {x}, "global_max_pool", [arg = std::move(arg)](Node& self) {
        if_grad(self, 0, [&](Tensor& g) {
            for (std::size_t c = 0; c < arg.size(); ++c) g[arg[c]] += self.grad[c];
        });
    });
}

Var channel_mean(const Var& x) {
    require_field(x, "channel_mean");
    const std::size_t C = x->value.dim(0), H = x->value.dim(1), W = x->value.dim(2), N = H * W;
    Tensor out(Shape{1, H, W});
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t n = 0; n < N; ++n) out[n] += x->value[c * N + n];
    for (double& v : out.data()) v /= static_cast<double>(C);
    return make_result(std::move(out), {x}, "channel_mean", [C, N](Node& self) {
        if_grad(self, 0, [&](Tensor& g) {
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t n = 0; n < N; ++n) g[c * N + n] += self.grad[n] / static_cast<double>(C);
        });
    });
}

Var channel_max(const Var& x) {
    require_field(x, "channel_max");
    const std::size_t C = x->value.dim(0), H = x->value.dim(1), W = x->value.dim(2), N = H * W;
    Tensor out(Shape{1, H, W});
    std::vector<std::size_t> arg(N);
    for (std::size_t n = 0; n < N; ++n) {
        std::size_t best = n;
        for (std::size_t c = 1; c < C; ++c)
            if (x->value[c * N + n] > x->value[best]) best = c * N + n;
        arg[n] = best;
        out[n] = x->value[best];
    }
    return make_result(std::move(out), {x}, "channel_max", [arg = std::move(arg)](Node& self) {
        if_grad(self, 0, [&](Tensor& g) {
            for (std::size_t n = 0; n < arg.size(); ++n) g[arg[n]] += self.grad[n];
        });
    });
}

Var pad_spatial(const Var& x, std::size_t H, std::size_t W) {
    require_field(x, "pad_spatial");
    const std::size_t C = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
    if (H < h || W < w) {
        throw std::invalid_argument("pad_spatial: target smaller than input " + shape_str(x->shape()));
    }
    Tensor out(Shape{C, H, W});
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w; ++j) out.at(c, i, j) = x->value.at(c, i, j);
    return make_result(std::move(out), {x}, "pad_spatial", [=](Node& self) {
        if_grad(self, 0, [&](Tensor& g) {
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t i = 0; i < h; ++i)
                    for (std::size_t j = 0; j < w; ++j) g.at(c, i, j) += self.grad.at(c, i, j);
        });
    });
}

Var crop_spatial(const Var& x, std::size_t H, std::size_t W) {
    require_field(x, "crop_spatial");
    const std::size_t C = x->value.dim(0);
    if (H > x->value.dim(1) || W > x->value.dim(2)) {
        throw std::invalid_argument("crop_spatial: target larger than input " + shape_str(x->shape()));
    }
    Tensor out(Shape{C, H, W});
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < H; ++i)
            for (std::size_t j = 0; j < W; ++j) out.at(c, i, j) = x->value.at(c, i, j);
    return make_result(std::move(out), {x}, "crop_spatial", [=](Node& self) {
        if_grad(self, 0, [&](Tensor& g) {
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t i = 0; i < H; ++i)
                    for (std::size_t j = 0; j < W; ++j) g.at(c, i, j) += self.grad.at(c, i, j);
        });
    });
}

Var relative_l2(const Var& pred, const Tensor& truth) {
    if (pred->value.shape() != truth.shape()) {
        throw std::invalid_argument("relative_l2: shape mismatch " + shape_str(pred->shape()) + " vs " +
                                    shape_str(truth.shape()));
    }
    const double tn = l2_norm(truth);
    if (tn == 0.0) throw std::invalid_argument("relative_l2: truth has zero norm");
    double s = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double d = pred->value[i] - truth[i];
        s += d * d;
    }
    const double en = std::sqrt(s);
    return make_result(Tensor::scalar(en / tn), {pred}, "relative_l2", [truth, tn, en](Node& self) {
        if (en == 0.0) return;  // subgradient 0 at the minimum
        const double c = self.grad[0] / (en * tn);
        const Tensor& p = self.parents[0]->value;
        if_grad(self, 0, [&](Tensor& g) {
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += c * (p[i] - truth[i]);
        });
    });
}

}  // namespace hafno::ops
