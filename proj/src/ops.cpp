#include "bira/ops.hpp"

#include <cmath>
#include <memory>

#include "bira/kernels.hpp"

namespace bira::ops {

using kernels::parallel_for;

namespace {

void require_same_shape(const char* op, const Var& a, const Var& b) {
    if (!a->value.same_shape(b->value)) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a->value.shape) +
                         " vs " + shape_str(b->value.shape));
    }
}

// Guarded denominator: exact when |d| >= eps, otherwise sign(d)*(|d| + eps)
// with sign(0) := +1. Counts activations in the given diagnostics counter.
inline double guard_den(double d, double eps, std::atomic<long>& counter) {
    if (std::abs(d) >= eps) return d;
    counter.fetch_add(1, std::memory_order_relaxed);
    return d < 0.0 ? d - eps : d + eps;
}

}  // namespace

Var elementwise(Tape& t, Ew kind, const Var& a, const Var& b, double div_eps) {
    static const char* names[] = {"add", "sub", "mul", "div"};
    require_same_shape(names[static_cast<int>(kind)], a, b);
    const i64 n = a->value.numel();
    const double* pa = a->value.data.data();
    const double* pb = b->value.data.data();
    Tensor out = Tensor::zeros(a->value.shape);
    double* po = out.data.data();

    // div keeps the effective (guarded) denominators for the backward pass
    std::shared_ptr<std::vector<double>> den;
    switch (kind) {
        case Ew::add:
            parallel_for(n, [&](i64 i) { po[i] = pa[i] + pb[i]; });
            break;
        case Ew::sub:
            parallel_for(n, [&](i64 i) { po[i] = pa[i] - pb[i]; });
            break;
        case Ew::mul:
            parallel_for(n, [&](i64 i) { po[i] = pa[i] * pb[i]; });
            break;
        case Ew::div: {
            if (div_eps == 0.0) {
                for (i64 i = 0; i < n; ++i) {
                    if (pb[i] == 0.0)
                        throw DomainError("div: exact zero divisor at index " + std::to_string(i) +
                                          " with no epsilon guard");
                }
                den = std::make_shared<std::vector<double>>(b->value.data);
            } else {
                den = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n));
                auto& counter = kernels::div_guard_hits();
                double* pd = den->data();
                // guard counting is exact; keep it off the parallel path
                for (i64 i = 0; i < n; ++i) pd[i] = guard_den(pb[i], div_eps, counter);
            }
            const double* pd = den->data();
            parallel_for(n, [&](i64 i) { po[i] = pa[i] / pd[i]; });
            break;
        }
    }

    bool rg = a->requires_grad || b->requires_grad;
    return t.record(std::move(out), rg, [a, b, kind, den, n](Node& self) {
        const double* g = self.grad.data();
        switch (kind) {
            case Ew::add:
                if (a->requires_grad) a->accumulate(g, n);
                if (b->requires_grad) b->accumulate(g, n);
                break;
            case Ew::sub:
                if (a->requires_grad) a->accumulate(g, n);
                if (b->requires_grad) {
                    b->ensure_grad();
                    double* gb = b->grad.data();
                    parallel_for(n, [&](i64 i) { gb[i] -= g[i]; });
                }
                break;
            case Ew::mul: {
                const double* pa = a->value.data.data();
                const double* pb = b->value.data.data();
                if (a->requires_grad) {
                    a->ensure_grad();
                    double* ga = a->grad.data();
                    parallel_for(n, [&](i64 i) { ga[i] += g[i] * pb[i]; });
                }
                if (b->requires_grad) {
                    b->ensure_grad();
                    double* gb = b->grad.data();
                    parallel_for(n, [&](i64 i) { gb[i] += g[i] * pa[i]; });
                }
                break;
            }
            case Ew::div: {
                const double* pd = den->data();
                const double* py = self.value.data.data();
                if (a->requires_grad) {
                    a->ensure_grad();
                    double* ga = a->grad.data();
                    parallel_for(n, [&](i64 i) { ga[i] += g[i] / pd[i]; });
                }
                if (b->requires_grad) {
                    b->ensure_grad();
                    double* gb = b->grad.data();
                    parallel_for(n, [&](i64 i) { gb[i] -= g[i] * py[i] / pd[i]; });
                }
                break;
            }
        }
    });
}

Var add(Tape& t, const Var& a, const Var& b) { return elementwise(t, Ew::add, a, b); }
Var sub(Tape& t, const Var& a, const Var& b) { return elementwise(t, Ew::sub, a, b); }
Var mul(Tape& t, const Var& a, const Var& b) { return elementwise(t, Ew::mul, a, b); }
Var div(Tape& t, const Var& a, const Var& b, double eps) {
    return elementwise(t, Ew::div, a, b, eps);
}

Var add_scalar(Tape& t, const Var& x, double c) {
    const i64 n = x->value.numel();
    Tensor out = x->value;
    for (auto& v : out.data) v += c;
    return t.record(std::move(out), x->requires_grad, [x, n](Node& self) {
        x->accumulate(self.grad.data(), n);
    });
}

Var scale(Tape& t, const Var& x, double c) {
    const i64 n = x->value.numel();
    Tensor out = x->value;
    for (auto& v : out.data) v *= c;
    return t.record(std::move(out), x->requires_grad, [x, c, n](Node& self) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        double* gx = x->grad.data();
        const double* g = self.grad.data();
        parallel_for(n, [&](i64 i) { gx[i] += c * g[i]; });
    });
}

Var matmul(Tape& t, const Var& a, const Var& b) {
    const Tensor& av = a->value;
    const Tensor& bv = b->value;
    if (av.ndim() != 2 || bv.ndim() != 2) {
        throw ShapeError("matmul: expected 2-D operands, got " + shape_str(av.shape) + " and " +
                         shape_str(bv.shape));
    }
    if (av.shape[1] != bv.shape[0]) {
        throw ShapeError("matmul: inner dimensions disagree, " + shape_str(av.shape) + " x " +
                         shape_str(bv.shape));
    }
    const i64 m = av.shape[0], k = av.shape[1], n = bv.shape[1];
    Tensor out = Tensor::zeros({m, n});
    kernels::gemm(false, false, m, n, k, av.data.data(), bv.data.data(), out.data.data(), false);
    bool rg = a->requires_grad || b->requires_grad;
    return t.record(std::move(out), rg, [a, b, m, k, n](Node& self) {
        const double* g = self.grad.data();
        if (a->requires_grad) {  // dA = dC * B^T
            a->ensure_grad();
            kernels::gemm(false, true, m, k, n, g, b->value.data.data(), a->grad.data(), true);
        }
        if (b->requires_grad) {  // dB = A^T * dC
            b->ensure_grad();
            kernels::gemm(true, false, k, n, m, a->value.data.data(), g, b->grad.data(), true);
        }
    });
}

Var conv2d(Tape& t, const Var& input, const Var& kernel, i64 stride, i64 pad) {
    const Tensor& in = input->value;
    const Tensor& ker = kernel->value;
    if (in.ndim() != 4 || ker.ndim() != 4) {
        throw ShapeError("conv2d: expected 4-D input and kernel, got " + shape_str(in.shape) +
                         " and " + shape_str(ker.shape));
    }
    if (in.shape[1] != ker.shape[1]) {
        throw ShapeError("conv2d: input channels " + std::to_string(in.shape[1]) +
                         " do not match kernel channels " + std::to_string(ker.shape[1]));
    }
    if (stride < 1 || pad < 0) throw ShapeError("conv2d: stride must be >= 1 and padding >= 0");
    kernels::Conv2dDims d;
    d.n = in.shape[0];
    d.c_in = in.shape[1];
    d.h = in.shape[2];
    d.w = in.shape[3];
    d.c_out = ker.shape[0];
    d.kh = ker.shape[2];
    d.kw = ker.shape[3];
    d.stride = stride;
    d.pad = pad;
    if (d.kh > d.h + 2 * pad || d.kw > d.w + 2 * pad) {
        throw ShapeError("conv2d: kernel " + shape_str(ker.shape) + " larger than padded input " +
                         shape_str(in.shape) + " with pad " + std::to_string(pad));
    }
    if ((d.h + 2 * pad - d.kh) % stride != 0 || (d.w + 2 * pad - d.kw) % stride != 0) {
        throw ShapeError("conv2d: non-integral output size for input " + shape_str(in.shape) +
                         ", kernel " + shape_str(ker.shape) + ", stride " + std::to_string(stride) +
                         ", pad " + std::to_string(pad));
    }
    d.h_out = (d.h + 2 * pad - d.kh) / stride + 1;
    d.w_out = (d.w + 2 * pad - d.kw) / stride + 1;

    Tensor out = Tensor::zeros({d.n, d.c_out, d.h_out, d.w_out});
    kernels::conv2d_forward(in.data.data(), ker.data.data(), out.data.data(), d);
    bool rg = input->requires_grad || kernel->requires_grad;
    return t.record(std::move(out), rg, [input, kernel, d](Node& self) {
        const double* g = self.grad.data();
        if (input->requires_grad) {
            input->ensure_grad();
            kernels::conv2d_backward_input(kernel->value.data.data(), g, input->grad.data(), d);
        }
        if (kernel->requires_grad) {
            kernel->ensure_grad();
            kernels::conv2d_backward_kernel(input->value.data.data(), g, kernel->grad.data(), d);
        }
    });
}

Var bias_add_channel(Tape& t, const Var& x, const Var& bias) {
    const Tensor& xv = x->value;
    if (xv.ndim() != 4) throw ShapeError("bias_add_channel: expected 4-D input");
    if (bias->value.ndim() != 1 || bias->value.shape[0] != xv.shape[1]) {
        throw ShapeError("bias_add_channel: bias " + shape_str(bias->value.shape) +
                         " does not match channels of " + shape_str(xv.shape));
    }
    const i64 nb = xv.shape[0], c = xv.shape[1], plane = xv.shape[2] * xv.shape[3];
    Tensor out = xv;
    double* po = out.data.data();
    const double* pb = bias->value.data.data();
    parallel_for(nb * c, [&](i64 t_) {
        const double bv = pb[t_ % c];
        double* row = po + t_ * plane;
        for (i64 i = 0; i < plane; ++i) row[i] += bv;
    });
    bool rg = x->requires_grad || bias->requires_grad;
    return t.record(std::move(out), rg, [x, bias, nb, c, plane](Node& self) {
        const double* g = self.grad.data();
        if (x->requires_grad) x->accumulate(g, nb * c * plane);
        if (bias->requires_grad) {
            bias->ensure_grad();
            double* gb = bias->grad.data();
            parallel_for(c, [&](i64 ch) {
                double acc = 0.0;
                for (i64 n = 0; n < nb; ++n) {
                    const double* row = g + (n * c + ch) * plane;
                    for (i64 i = 0; i < plane; ++i) acc += row[i];
                }
                gb[ch] += acc;
            });
        }
    });
}

Var bias_add_row(Tape& t, const Var& x, const Var& bias) {
    const Tensor& xv = x->value;
    if (xv.ndim() != 2) throw ShapeError("bias_add_row: expected 2-D input");
    if (bias->value.ndim() != 1 || bias->value.shape[0] != xv.shape[1]) {
        throw ShapeError("bias_add_row: bias " + shape_str(bias->value.shape) +
                         " does not match row width of " + shape_str(xv.shape));
    }
    const i64 n = xv.shape[0], d = xv.shape[1];
    Tensor out = xv;
    const double* pb = bias->value.data.data();
    parallel_for(n, [&](i64 r) {
        double* row = out.data.data() + r * d;
        for (i64 j = 0; j < d; ++j) row[j] += pb[j];
    });
    bool rg = x->requires_grad || bias->requires_grad;
    return t.record(std::move(out), rg, [x, bias, n, d](Node& self) {
        const double* g = self.grad.data();
        if (x->requires_grad) x->accumulate(g, n * d);
        if (bias->requires_grad) {
            bias->ensure_grad();
            double* gb = bias->grad.data();
            for (i64 r = 0; r < n; ++r)
                for (i64 j = 0; j < d; ++j) gb[j] += g[r * d + j];
        }
    });
}

Var relu(Tape& t, const Var& x) {
    const i64 n = x->value.numel();
    Tensor out = Tensor::zeros(x->value.shape);
    const double* px = x->value.data.data();
    double* po = out.data.data();
    parallel_for(n, [&](i64 i) { po[i] = px[i] > 0.0 ? px[i] : 0.0; });
    return t.record(std::move(out), x->requires_grad, [x, n](Node& self) {
        x->ensure_grad();
        double* gx = x->grad.data();
        const double* g = self.grad.data();
        const double* px = x->value.data.data();
        parallel_for(n, [&](i64 i) {
            if (px[i] > 0.0) gx[i] += g[i];
        });
    });
}

Var sigmoid(Tape& t, const Var& x) {
    const i64 n = x->value.numel();
    Tensor out = Tensor::zeros(x->value.shape);
    const double* px = x->value.data.data();
    double* po = out.data.data();
    parallel_for(n, [&](i64 i) {
        const double v = px[i];
        double y;
        if (v >= 0.0) {
            y = 1.0 / (1.0 + std::exp(-v));
        } else {
            const double e = std::exp(v);
            y = e / (1.0 + e);
        }
        // keep the output strictly inside (0,1); doubles saturate past |x|~37
        if (y >= 1.0) y = std::nextafter(1.0, 0.0);
        if (y <= 0.0) y = std::nextafter(0.0, 1.0);
        po[i] = y;
    });
    return t.record(std::move(out), x->requires_grad, [x, n](Node& self) {
        x->ensure_grad();
        double* gx = x->grad.data();
        const double* g = self.grad.data();
        const double* y = self.value.data.data();
        parallel_for(n, [&](i64 i) { gx[i] += g[i] * y[i] * (1.0 - y[i]); });
    });
}

Var global_avg_pool(Tape& t, const Var& x) {
    const Tensor& xv = x->value;
    if (xv.ndim() != 4) {
        throw ShapeError("global_avg_pool: expected [N,C,H,W], got " + shape_str(xv.shape));
    }
    const i64 n = xv.shape[0], c = xv.shape[1], plane = xv.shape[2] * xv.shape[3];
    Tensor out = Tensor::zeros({n, c});
    const double* px = xv.data.data();
    double* po = out.data.data();
    parallel_for(n * c, [&](i64 t_) {
        const double* map = px + t_ * plane;
        double acc = 0.0;
        for (i64 i = 0; i < plane; ++i) acc += map[i];
        po[t_] = acc / static_cast<double>(plane);
    });
    return t.record(std::move(out), x->requires_grad, [x, n, c, plane](Node& self) {
        x->ensure_grad();
        double* gx = x->grad.data();
        const double* g = self.grad.data();
        const double inv = 1.0 / static_cast<double>(plane);
        parallel_for(n * c, [&](i64 t_) {
            const double gv = g[t_] * inv;
            double* map = gx + t_ * plane;
            for (i64 i = 0; i < plane; ++i) map[i] += gv;
        });
    });
}

Var outer_product(Tape& t, const Var& z) {
    const Tensor& zv = z->value;
    i64 rows, c;
    Shape out_shape;
    if (zv.ndim() == 1) {
        rows = 1;
        c = zv.shape[0];
        out_shape = {c, c};
    } else if (zv.ndim() == 2) {
        rows = zv.shape[0];
        c = zv.shape[1];
        out_shape = {rows, c * c};
    } else {
        throw ShapeError("outer_product: expected [C] or [N,C], got " + shape_str(zv.shape));
    }
    Tensor out = Tensor::zeros(out_shape);
    const double* pz = zv.data.data();
    double* po = out.data.data();
    parallel_for(rows, [&](i64 r) {
        const double* zr = pz + r * c;
        double* br = po + r * c * c;
        for (i64 i = 0; i < c; ++i)
            for (i64 j = 0; j < c; ++j) br[i * c + j] = zr[i] * zr[j];
    });
    return t.record(std::move(out), z->requires_grad, [z, rows, c](Node& self) {
        z->ensure_grad();
        double* gz = z->grad.data();
        const double* g = self.grad.data();
        const double* pz = z->value.data.data();
        parallel_for(rows, [&](i64 r) {
            const double* zr = pz + r * c;
            const double* gr = g + r * c * c;
            double* gzr = gz + r * c;
            for (i64 i = 0; i < c; ++i) {
                double acc = 0.0;
                for (i64 j = 0; j < c; ++j) acc += gr[i * c + j] * zr[j] + gr[j * c + i] * zr[j];
                gzr[i] += acc;
            }
        });
    });
}

Var signed_sqrt(Tape& t, const Var& x) {
    const i64 n = x->value.numel();
    Tensor out = Tensor::zeros(x->value.shape);
    const double* px = x->value.data.data();
    double* po = out.data.data();
    parallel_for(n, [&](i64 i) {
        const double v = px[i];
        po[i] = v >= 0.0 ? std::sqrt(v) : -std::sqrt(-v);
    });
    return t.record(std::move(out), x->requires_grad, [x, n](Node& self) {
        x->ensure_grad();
        double* gx = x->grad.data();
        const double* g = self.grad.data();
        const double* px = x->value.data.data();
        // d/dx sign(x)sqrt(|x|) = 1/(2 sqrt(|x|)); clamped below |x| = 1e-12
        parallel_for(n, [&](i64 i) {
            const double a = std::max(std::abs(px[i]), 1e-12);
            gx[i] += g[i] * 0.5 / std::sqrt(a);
        });
    });
}

Var l2_normalize(Tape& t, const Var& x, double eps) {
    const Tensor& xv = x->value;
    i64 rows, d;
    if (xv.ndim() == 1) {
        rows = 1;
        d = xv.shape[0];
    } else if (xv.ndim() == 2) {
        rows = xv.shape[0];
        d = xv.shape[1];
    } else {
        throw ShapeError("l2_normalize: expected [D] or [N,D], got " + shape_str(xv.shape));
    }
    Tensor out = Tensor::zeros(xv.shape);
    auto norms = std::make_shared<std::vector<double>>(static_cast<std::size_t>(rows));
    auto guarded = std::make_shared<std::vector<double>>(static_cast<std::size_t>(rows));
    const double* px = xv.data.data();
    double* po = out.data.data();
    auto& counter = kernels::norm_guard_hits();
    for (i64 r = 0; r < rows; ++r) {
        const double* xr = px + r * d;
        double ss = 0.0;
        for (i64 j = 0; j < d; ++j) ss += xr[j] * xr[j];
        const double nrm = std::sqrt(ss);
        (*norms)[static_cast<std::size_t>(r)] = nrm;
        (*guarded)[static_cast<std::size_t>(r)] = guard_den(nrm, eps, counter);
    }
    parallel_for(rows, [&](i64 r) {
        const double inv = 1.0 / (*guarded)[static_cast<std::size_t>(r)];
        const double* xr = px + r * d;
        double* yr = po + r * d;
        for (i64 j = 0; j < d; ++j) yr[j] = xr[j] * inv;
    });
    return t.record(std::move(out), x->requires_grad, [x, rows, d, norms, guarded](Node& self) {
        x->ensure_grad();
        double* gx = x->grad.data();
        const double* g = self.grad.data();
        const double* px = x->value.data.data();
        parallel_for(rows, [&](i64 r) {
            const double nrm = (*norms)[static_cast<std::size_t>(r)];
            const double gd = (*guarded)[static_cast<std::size_t>(r)];
            const double* xr = px + r * d;
            const double* gr = g + r * d;
            double* gxr = gx + r * d;
            double dot = 0.0;
            for (i64 j = 0; j < d; ++j) dot += gr[j] * xr[j];
            const double inv = 1.0 / gd;
            if (nrm > 1e-300) {
                const double k = dot / (gd * gd * nrm);
                for (i64 j = 0; j < d; ++j) gxr[j] += gr[j] * inv - xr[j] * k;
            } else {
                for (i64 j = 0; j < d; ++j) gxr[j] += gr[j] * inv;
            }
        });
    });
}

Var log_softmax(Tape& t, const Var& x) {
    const Tensor& xv = x->value;
    i64 rows, c;
    if (xv.ndim() == 1) {
        rows = 1;
        c = xv.shape[0];
    } else if (xv.ndim() == 2) {
        rows = xv.shape[0];
        c = xv.shape[1];
    } else {
        throw ShapeError("log_softmax: expected [C] or [N,C], got " + shape_str(xv.shape));
    }
    Tensor out = Tensor::zeros(xv.shape);
    const double* px = xv.data.data();
    double* po = out.data.data();
    parallel_for(rows, [&](i64 r) {
        const double* xr = px + r * c;
        double* yr = po + r * c;
        double m = xr[0];
        for (i64 j = 1; j < c; ++j) m = std::max(m, xr[j]);
        double s = 0.0;
        for (i64 j = 0; j < c; ++j) s += std::exp(xr[j] - m);
        const double lse = m + std::log(s);
        for (i64 j = 0; j < c; ++j) yr[j] = xr[j] - lse;
    });
    return t.record(std::move(out), x->requires_grad, [x, rows, c](Node& self) {
        x->ensure_grad();
        double* gx = x->grad.data();
        const double* g = self.grad.data();
        const double* y = self.value.data.data();
        parallel_for(rows, [&](i64 r) {
            const double* gr = g + r * c;
            const double* yr = y + r * c;
            double* gxr = gx + r * c;
            double gsum = 0.0;
            for (i64 j = 0; j < c; ++j) gsum += gr[j];
            for (i64 j = 0; j < c; ++j) gxr[j] += gr[j] - std::exp(yr[j]) * gsum;
        });
    });
}

Var reshape(Tape& t, const Var& x, Shape new_shape) {
    if (shape_numel(new_shape) != x->value.numel()) {
        throw ShapeError("reshape: cannot view " + shape_str(x->value.shape) + " as " +
                         shape_str(new_shape));
    }
    Tensor out(new_shape, x->value.data);
    const i64 n = x->value.numel();
    return t.record(std::move(out), x->requires_grad,
                    [x, n](Node& self) { x->accumulate(self.grad.data(), n); });
}

Var sum_all(Tape& t, const Var& x) {
    const i64 n = x->value.numel();
    double acc = 0.0;
    for (double v : x->value.data) acc += v;
    return t.record(Tensor::scalar(acc), x->requires_grad, [x, n](Node& self) {
        x->ensure_grad();
        const double g = self.grad[0];
        double* gx = x->grad.data();
        parallel_for(n, [&](i64 i) { gx[i] += g; });
    });
}

Var mean_all(Tape& t, const Var& x) {
    const i64 n = x->value.numel();
    double acc = 0.0;
    for (double v : x->value.data) acc += v;
    acc /= static_cast<double>(n);
    return t.record(Tensor::scalar(acc), x->requires_grad, [x, n](Node& self) {
        x->ensure_grad();
        const double g = self.grad[0] / static_cast<double>(n);
        double* gx = x->grad.data();
        parallel_for(n, [&](i64 i) { gx[i] += g; });
    });
}

namespace {
struct BnSaved {
    std::vector<double> xhat;    // normalized pre-scale values
    std::vector<double> invstd;  // per channel
    i64 n, c, plane;
};
}  // namespace

Var batch_norm(Tape& t, const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean,
               Tensor& running_var, bool training, double momentum, double eps) {
    const Tensor& xv = x->value;
    if (xv.ndim() != 4) throw ShapeError("batch_norm: expected [N,C,H,W]");
    const i64 n = xv.shape[0], c = xv.shape[1], plane = xv.shape[2] * xv.shape[3];
    if (gamma->value.numel() != c || beta->value.numel() != c || running_mean.numel() != c ||
        running_var.numel() != c) {
        throw ShapeError("batch_norm: per-channel parameter size mismatch for " +
                         shape_str(xv.shape));
    }
    const i64 m = n * plane;
    const double* px = xv.data.data();
    const double* pg = gamma->value.data.data();
    const double* pb = beta->value.data.data();
    Tensor out = Tensor::zeros(xv.shape);
    double* po = out.data.data();

    if (!training) {
        const double* rm = running_mean.data.data();
        const double* rv = running_var.data.data();
        parallel_for(n * c, [&](i64 t_) {
            const i64 ch = t_ % c;
            const double inv = 1.0 / std::sqrt(rv[ch] + eps);
            const double* xin = px + t_ * plane;
            double* yout = po + t_ * plane;
            for (i64 i = 0; i < plane; ++i) yout[i] = pg[ch] * (xin[i] - rm[ch]) * inv + pb[ch];
        });
        return t.record(std::move(out), x->requires_grad || gamma->requires_grad ||
                                            beta->requires_grad,
                        [x, gamma, beta, rv = running_var.data, rm = running_mean.data, n, c,
                         plane, eps](Node& self) {
                            const double* g = self.grad.data();
                            const double* px = x->value.data.data();
                            for (i64 ch = 0; ch < c; ++ch) {
                                const double inv = 1.0 / std::sqrt(rv[static_cast<std::size_t>(ch)] + eps);
                                double dg = 0.0, db = 0.0;
                                for (i64 b = 0; b < n; ++b) {
                                    const i64 base = (b * c + ch) * plane;
                                    for (i64 i = 0; i < plane; ++i) {
                                        const double gv = g[base + i];
                                        db += gv;
                                        dg += gv * (px[base + i] - rm[static_cast<std::size_t>(ch)]) * inv;
                                    }
                                }
                                if (gamma->requires_grad) gamma->accumulate_at(ch, dg);
                                if (beta->requires_grad) beta->accumulate_at(ch, db);
                                if (x->requires_grad) {
                                    x->ensure_grad();
                                    const double k = gamma->value.data[static_cast<std::size_t>(ch)] * inv;
                                    for (i64 b = 0; b < n; ++b) {
                                        const i64 base = (b * c + ch) * plane;
                                        for (i64 i = 0; i < plane; ++i)
                                            x->grad[static_cast<std::size_t>(base + i)] += k * g[base + i];
                                    }
                                }
                            }
                        });
    }

    auto saved = std::make_shared<BnSaved>();
    saved->xhat.resize(static_cast<std::size_t>(n * c * plane));
    saved->invstd.resize(static_cast<std::size_t>(c));
    saved->n = n;
    saved->c = c;
    saved->plane = plane;
    std::vector<double> means(static_cast<std::size_t>(c));

    parallel_for(c, [&](i64 ch) {
        double sum = 0.0, sumsq = 0.0;
        for (i64 b = 0; b < n; ++b) {
            const double* xin = px + (b * c + ch) * plane;
            for (i64 i = 0; i < plane; ++i) {
                sum += xin[i];
                sumsq += xin[i] * xin[i];
            }
        }
        const double mean = sum / static_cast<double>(m);
        double var = sumsq / static_cast<double>(m) - mean * mean;
        if (var < 0.0) var = 0.0;  // rounding
        means[static_cast<std::size_t>(ch)] = mean;
        const double inv = 1.0 / std::sqrt(var + eps);
        saved->invstd[static_cast<std::size_t>(ch)] = inv;
        running_mean.data[static_cast<std::size_t>(ch)] =
            (1.0 - momentum) * running_mean.data[static_cast<std::size_t>(ch)] + momentum * mean;
        running_var.data[static_cast<std::size_t>(ch)] =
            (1.0 - momentum) * running_var.data[static_cast<std::size_t>(ch)] + momentum * var;
    });
    parallel_for(n * c, [&](i64 t_) {
        const i64 ch = t_ % c;
        const double mean = means[static_cast<std::size_t>(ch)];
        const double inv = saved->invstd[static_cast<std::size_t>(ch)];
        const double* xin = px + t_ * plane;
        double* xh = saved->xhat.data() + t_ * plane;
        double* yout = po + t_ * plane;
        for (i64 i = 0; i < plane; ++i) {
            xh[i] = (xin[i] - mean) * inv;
            yout[i] = pg[ch] * xh[i] + pb[ch];
        }
    });

    bool rg = x->requires_grad || gamma->requires_grad || beta->requires_grad;
    return t.record(std::move(out), rg, [x, gamma, beta, saved](Node& self) {
        const i64 n = saved->n, c = saved->c, plane = saved->plane;
        const double md = static_cast<double>(n * plane);
        const double* g = self.grad.data();
        const double* xh = saved->xhat.data();
        // allocate before the parallel region; per-channel writes are disjoint
        if (gamma->requires_grad) gamma->ensure_grad();
        if (beta->requires_grad) beta->ensure_grad();
        if (x->requires_grad) x->ensure_grad();
        parallel_for(c, [&](i64 ch) {
            double s1 = 0.0, s2 = 0.0;
            for (i64 b = 0; b < n; ++b) {
                const i64 base = (b * c + ch) * plane;
                for (i64 i = 0; i < plane; ++i) {
                    s1 += g[base + i];
                    s2 += g[base + i] * xh[base + i];
                }
            }
            if (gamma->requires_grad) gamma->accumulate_at(ch, s2);
            if (beta->requires_grad) beta->accumulate_at(ch, s1);
            if (x->requires_grad) {
                x->ensure_grad();
                const double k =
                    gamma->value.data[static_cast<std::size_t>(ch)] *
                    saved->invstd[static_cast<std::size_t>(ch)] / md;
                for (i64 b = 0; b < n; ++b) {
                    const i64 base = (b * c + ch) * plane;
                    for (i64 i = 0; i < plane; ++i) {
                        x->grad[static_cast<std::size_t>(base + i)] +=
                            k * (md * g[base + i] - s1 - xh[base + i] * s2);
                    }
                }
            }
        });
    });
}

Var weighted_nll(Tape& t, const Var& logp, const std::vector<int>& labels,
                 const std::vector<double>& weights, bool mean_reduction) {
    const Tensor& lp = logp->value;
    i64 rows, c;
    if (lp.ndim() == 1) {
        rows = 1;
        c = lp.shape[0];
    } else if (lp.ndim() == 2) {
        rows = lp.shape[0];
        c = lp.shape[1];
    } else {
        throw ShapeError("weighted_nll: expected [C] or [N,C]");
    }
    if (static_cast<i64>(labels.size()) != rows || static_cast<i64>(weights.size()) != rows) {
        throw ShapeError("weighted_nll: labels/weights size does not match batch " +
                         std::to_string(rows));
    }
    for (int y : labels) {
        if (y < 0 || y >= c)
            throw DomainError("weighted_nll: label " + std::to_string(y) + " out of range [0," +
                              std::to_string(c) + ")");
    }
    double acc = 0.0;
    for (i64 r = 0; r < rows; ++r) acc += -weights[static_cast<std::size_t>(r)] *
                                          lp.data[static_cast<std::size_t>(r * c + labels[static_cast<std::size_t>(r)])];
    if (mean_reduction) acc /= static_cast<double>(rows);
    return t.record(Tensor::scalar(acc), logp->requires_grad,
                    [logp, labels, weights, rows, c, mean_reduction](Node& self) {
                        logp->ensure_grad();
                        const double g = mean_reduction
                                             ? self.grad[0] / static_cast<double>(rows)
                                             : self.grad[0];
                        for (i64 r = 0; r < rows; ++r) {
                            logp->grad[static_cast<std::size_t>(
                                r * c + labels[static_cast<std::size_t>(r)])] -=
                                g * weights[static_cast<std::size_t>(r)];
                        }
                    });
}

}  // namespace bira::ops
