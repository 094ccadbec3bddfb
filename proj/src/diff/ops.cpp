#include "theta/diff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "theta/errors.hpp"

namespace theta::diff {

namespace {

enum class Broadcast { same, rows };

Broadcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() == b.shape()) {
        return Broadcast::same;
    }
    if (b.numel() == a.last_dim() && b.last_dim() == a.last_dim()) {
        return Broadcast::rows;
    }
    throw ConfigError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

// Reduces a gradient shaped like `a` onto `b` under the given broadcast.
std::vector<double> reduce_to(std::vector<double> g, Broadcast kind, std::size_t width) {
    if (kind == Broadcast::same) {
        return g;
    }
    std::vector<double> out(width, 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        out[i % width] += g[i];
    }
    return out;
}

template <typename F>
Tensor unary(const Tensor& x, const char* name, F&& f, std::function<void(Node&)> backward) {
    std::vector<double> out(x.numel());
    auto xv = x.values();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = f(xv[i]);
    }
    return Tensor::make(x.shape(), std::move(out), {x}, std::move(backward), name);
}

void require_rank2(const Tensor& t, const char* op) {
    if (t.rank() != 2) {
        throw ConfigError(std::string(op) + ": expected rank-2 tensor, got " + shape_str(t.shape()));
    }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    const auto kind = broadcast_kind(a, b, "add");
    const std::size_t w = b.numel();
    std::vector<double> out(a.numel());
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = av[i] + bv[i % w];
    }
    return Tensor::make(a.shape(), std::move(out), {a, b},
                        [kind, w](Node& self) {
                            self.parents[0]->accumulate(self.grad);
                            if (self.parents[1]->requires_grad) {
                                self.parents[1]->accumulate(reduce_to(self.grad, kind, w));
                            }
                        },
                        "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
    const auto kind = broadcast_kind(a, b, "sub");
    const std::size_t w = b.numel();
    std::vector<double> out(a.numel());
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = av[i] - bv[i % w];
    }
    return Tensor::make(a.shape(), std::move(out), {a, b},
                        [kind, w](Node& self) {
                            self.parents[0]->accumulate(self.grad);
                            if (self.parents[1]->requires_grad) {
                                std::vector<double> g(self.grad.size());
                                for (std::size_t i = 0; i < g.size(); ++i) {
                                    g[i] = -self.grad[i];
                                }
                                self.parents[1]->accumulate(reduce_to(std::move(g), kind, w));
                            }
                        },
                        "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
    const auto kind = broadcast_kind(a, b, "mul");
    const std::size_t w = b.numel();
    std::vector<double> out(a.numel());
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = av[i] * bv[i % w];
    }
    return Tensor::make(a.shape(), std::move(out), {a, b},
                        [kind, w](Node& self) {
                            const auto& av = self.parents[0]->value;
                            const auto& bv = self.parents[1]->value;
                            const std::size_t n = self.grad.size();
                            if (self.parents[0]->requires_grad) {
                                std::vector<double> ga(n);
                                for (std::size_t i = 0; i < n; ++i) {
                                    ga[i] = self.grad[i] * bv[i % w];
                                }
                                self.parents[0]->accumulate(ga);
                            }
                            if (self.parents[1]->requires_grad) {
                                std::vector<double> gb(n);
                                for (std::size_t i = 0; i < n; ++i) {
                                    gb[i] = self.grad[i] * av[i];
                                }
                                self.parents[1]->accumulate(reduce_to(std::move(gb), kind, w));
                            }
                        },
                        "mul");
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    const std::size_t m = a.shape()[0];
    const std::size_t k = a.shape()[1];
    const std::size_t n = b.shape()[1];
    if (b.shape()[0] != k) {
        throw ConfigError("matmul: inner dimensions differ " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    }
    std::vector<double> out(m * n, 0.0);
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            if (aip == 0.0) {
                continue;
            }
            const double* brow = &bv[p * n];
            double* orow = &out[i * n];
            for (std::size_t j = 0; j < n; ++j) {
                orow[j] += aip * brow[j];
            }
        }
    }
    return Tensor::make({m, n}, std::move(out), {a, b},
                        [m, k, n](Node& self) {
                            const auto& g = self.grad;
                            Node& pa = *self.parents[0];
                            Node& pb = *self.parents[1];
                            if (pa.requires_grad) {
                                // dA = dC * B^T
                                auto& ga = pa.grad_buffer();
                                for (std::size_t i = 0; i < m; ++i) {
                                    for (std::size_t p = 0; p < k; ++p) {
                                        double acc = 0.0;
                                        const double* brow = &pb.value[p * n];
                                        const double* grow = &g[i * n];
                                        for (std::size_t j = 0; j < n; ++j) {
                                            acc += grow[j] * brow[j];
                                        }
                                        ga[i * k + p] += acc;
                                    }
                                }
                            }
                            if (pb.requires_grad) {
                                // dB = A^T * dC
                                auto& gb = pb.grad_buffer();
                                for (std::size_t i = 0; i < m; ++i) {
                                    for (std::size_t p = 0; p < k; ++p) {
                                        const double aip = pa.value[i * k + p];
                                        if (aip == 0.0) {
                                            continue;
                                        }
                                        const double* grow = &g[i * n];
                                        double* gbrow = &gb[p * n];
                                        for (std::size_t j = 0; j < n; ++j) {
                                            gbrow[j] += aip * grow[j];
                                        }
                                    }
                                }
                            }
                        },
                        "matmul");
}

Tensor transpose(const Tensor& a) {
    require_rank2(a, "transpose");
    const std::size_t m = a.shape()[0];
    const std::size_t n = a.shape()[1];
    std::vector<double> out(m * n);
    auto av = a.values();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            out[j * m + i] = av[i * n + j];
        }
    }
    return Tensor::make({n, m}, std::move(out), {a},
                        [m, n](Node& self) {
                            std::vector<double> g(m * n);
                            for (std::size_t i = 0; i < m; ++i) {
                                for (std::size_t j = 0; j < n; ++j) {
                                    g[i * n + j] = self.grad[j * m + i];
                                }
                            }
                            self.parents[0]->accumulate(g);
                        },
                        "transpose");
}

Tensor relu(const Tensor& x) {
    return unary(x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
                 [](Node& self) {
                     const auto& xv = self.parents[0]->value;
                     std::vector<double> g(xv.size());
                     for (std::size_t i = 0; i < g.size(); ++i) {
                         g[i] = xv[i] > 0.0 ? self.grad[i] : 0.0;
                     }
                     self.parents[0]->accumulate(g);
                 });
}

Tensor tanh(const Tensor& x) {
    return unary(x, "tanh", [](double v) { return std::tanh(v); },
                 [](Node& self) {
                     std::vector<double> g(self.value.size());
                     for (std::size_t i = 0; i < g.size(); ++i) {
                         g[i] = self.grad[i] * (1.0 - self.value[i] * self.value[i]);
                     }
                     self.parents[0]->accumulate(g);
                 });
}

Tensor exp(const Tensor& x) {
    return unary(x, "exp", [](double v) { return std::exp(v); },
                 [](Node& self) {
                     std::vector<double> g(self.value.size());
                     for (std::size_t i = 0; i < g.size(); ++i) {
                         g[i] = self.grad[i] * self.value[i];
                     }
                     self.parents[0]->accumulate(g);
                 });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
    return unary(x, "clamp", [lo, hi](double v) { return std::clamp(v, lo, hi); },
                 [lo, hi](Node& self) {
                     const auto& xv = self.parents[0]->value;
                     std::vector<double> g(xv.size());
                     for (std::size_t i = 0; i < g.size(); ++i) {
                         g[i] = (xv[i] > lo && xv[i] < hi) ? self.grad[i] : 0.0;
                     }
                     self.parents[0]->accumulate(g);
                 });
}

Tensor scale(const Tensor& x, double s) {
    return unary(x, "scale", [s](double v) { return v * s; },
                 [s](Node& self) {
                     std::vector<double> g(self.grad.size());
                     for (std::size_t i = 0; i < g.size(); ++i) {
                         g[i] = self.grad[i] * s;
                     }
                     self.parents[0]->accumulate(g);
                 });
}

Tensor neg(const Tensor& x) { return scale(x, -1.0); }

Tensor layer_norm(const Tensor& x, double eps) {
    const std::size_t w = x.last_dim();
    const std::size_t rows = x.outer();
    std::vector<double> out(x.numel());
    std::vector<double> inv_std(rows);
    auto xv = x.values();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = &xv[r * w];
        double mu = 0.0;
        for (std::size_t j = 0; j < w; ++j) {
            mu += row[j];
        }
        mu /= static_cast<double>(w);
        double var = 0.0;
        for (std::size_t j = 0; j < w; ++j) {
            var += (row[j] - mu) * (row[j] - mu);
        }
        var /= static_cast<double>(w);
        inv_std[r] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < w; ++j) {
            out[r * w + j] = (row[j] - mu) * inv_std[r];
        }
    }
    return Tensor::make(x.shape(), std::move(out), {x},
                        [w, rows, inv_std = std::move(inv_std)](Node& self) {
                            // dx = inv_std * (dy - mean(dy) - xhat * mean(dy * xhat))
                            std::vector<double> g(self.grad.size());
                            const double invw = 1.0 / static_cast<double>(w);
                            for (std::size_t r = 0; r < rows; ++r) {
                                const double* dy = &self.grad[r * w];
                                const double* xh = &self.value[r * w];
                                double mdy = 0.0;
                                double mdyx = 0.0;
                                for (std::size_t j = 0; j < w; ++j) {
                                    mdy += dy[j];
                                    mdyx += dy[j] * xh[j];
                                }
                                mdy *= invw;
                                mdyx *= invw;
                                for (std::size_t j = 0; j < w; ++j) {
                                    g[r * w + j] = inv_std[r] * (dy[j] - mdy - xh[j] * mdyx);
                                }
                            }
                            self.parents[0]->accumulate(g);
                        },
                        "layer_norm");
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    return add(mul(layer_norm(x, eps), gain), bias);
}

Tensor softmax(const Tensor& x) {
    const std::size_t w = x.last_dim();
    const std::size_t rows = x.outer();
    std::vector<double> out(x.numel());
    auto xv = x.values();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = &xv[r * w];
        const double mx = *std::max_element(row, row + w);
        double z = 0.0;
        for (std::size_t j = 0; j < w; ++j) {
            out[r * w + j] = std::exp(row[j] - mx);
            z += out[r * w + j];
        }
        for (std::size_t j = 0; j < w; ++j) {
            out[r * w + j] /= z;
        }
    }
    return Tensor::make(x.shape(), std::move(out), {x},
                        [w, rows](Node& self) {
                            std::vector<double> g(self.grad.size());
                            for (std::size_t r = 0; r < rows; ++r) {
                                const double* y = &self.value[r * w];
                                const double* dy = &self.grad[r * w];
                                double dot = 0.0;
                                for (std::size_t j = 0; j < w; ++j) {
                                    dot += y[j] * dy[j];
                                }
                                for (std::size_t j = 0; j < w; ++j) {
                                    g[r * w + j] = y[j] * (dy[j] - dot);
                                }
                            }
                            self.parents[0]->accumulate(g);
                        },
                        "softmax");
}

Tensor log_softmax(const Tensor& x) {
    const std::size_t w = x.last_dim();
    const std::size_t rows = x.outer();
    std::vector<double> out(x.numel());
    auto xv = x.values();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = &xv[r * w];
        const double mx = *std::max_element(row, row + w);
        double z = 0.0;
        for (std::size_t j = 0; j < w; ++j) {
            z += std::exp(row[j] - mx);
        }
        const double lse = mx + std::log(z);
        for (std::size_t j = 0; j < w; ++j) {
            out[r * w + j] = row[j] - lse;
        }
    }
    return Tensor::make(x.shape(), std::move(out), {x},
                        [w, rows](Node& self) {
                            // dx = dy - softmax * sum(dy)
                            std::vector<double> g(self.grad.size());
                            for (std::size_t r = 0; r < rows; ++r) {
                                const double* ly = &self.value[r * w];
                                const double* dy = &self.grad[r * w];
                                double total = 0.0;
                                for (std::size_t j = 0; j < w; ++j) {
                                    total += dy[j];
                                }
                                for (std::size_t j = 0; j < w; ++j) {
                                    g[r * w + j] = dy[j] - std::exp(ly[j]) * total;
                                }
                            }
                            self.parents[0]->accumulate(g);
                        },
                        "log_softmax");
}

Tensor concat(std::span<const Tensor> parts) {
    if (parts.empty()) {
        throw ConfigError("concat: no inputs");
    }
    const std::size_t rows = parts[0].outer();
    Shape shape = parts[0].shape();
    std::vector<std::size_t> widths;
    std::size_t total = 0;
    for (const auto& p : parts) {
        if (p.rank() != shape.size() || p.outer() != rows ||
            !std::equal(shape.begin(), shape.end() - 1, p.shape().begin())) {
            throw ConfigError("concat: leading shapes differ " + shape_str(shape) + " vs " + shape_str(p.shape()));
        }
        widths.push_back(p.last_dim());
        total += p.last_dim();
    }
    shape.back() = total;
    std::vector<double> out(rows * total);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        auto pv = parts[k].values();
        for (std::size_t r = 0; r < rows; ++r) {
            std::copy_n(&pv[r * widths[k]], widths[k], &out[r * total + offset]);
        }
        offset += widths[k];
    }
    return Tensor::make(std::move(shape), std::move(out), {parts.begin(), parts.end()},
                        [rows, total, widths](Node& self) {
                            std::size_t offset = 0;
                            for (std::size_t k = 0; k < widths.size(); ++k) {
                                Node& p = *self.parents[k];
                                if (p.requires_grad) {
                                    auto& g = p.grad_buffer();
                                    for (std::size_t r = 0; r < rows; ++r) {
                                        for (std::size_t j = 0; j < widths[k]; ++j) {
                                            g[r * widths[k] + j] += self.grad[r * total + offset + j];
                                        }
                                    }
                                }
                                offset += widths[k];
                            }
                        },
                        "concat");
}

Tensor slice(const Tensor& x, std::size_t offset, std::size_t length) {
    const std::size_t w = x.last_dim();
    if (length == 0 || offset + length > w) {
        throw ConfigError("slice: range [" + std::to_string(offset) + "," + std::to_string(offset + length) +
                          ") outside last axis of " + shape_str(x.shape()));
    }
    const std::size_t rows = x.outer();
    Shape shape = x.shape();
    shape.back() = length;
    std::vector<double> out(rows * length);
    auto xv = x.values();
    for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(&xv[r * w + offset], length, &out[r * length]);
    }
    return Tensor::make(std::move(shape), std::move(out), {x},
                        [rows, w, offset, length](Node& self) {
                            auto& g = self.parents[0]->grad_buffer();
                            for (std::size_t r = 0; r < rows; ++r) {
                                for (std::size_t j = 0; j < length; ++j) {
                                    g[r * w + offset + j] += self.grad[r * length + j];
                                }
                            }
                        },
                        "slice");
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count) {
    require_rank2(x, "slice_rows");
    const std::size_t n = x.shape()[1];
    if (count == 0 || begin + count > x.shape()[0]) {
        throw ConfigError("slice_rows: rows out of range for " + shape_str(x.shape()));
    }
    auto xv = x.values();
    std::vector<double> out(xv.begin() + static_cast<std::ptrdiff_t>(begin * n),
                            xv.begin() + static_cast<std::ptrdiff_t>((begin + count) * n));
    return Tensor::make({count, n}, std::move(out), {x},
                        [begin, n](Node& self) {
                            auto& g = self.parents[0]->grad_buffer();
                            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                                g[begin * n + i] += self.grad[i];
                            }
                        },
                        "slice_rows");
}

Tensor sum(const Tensor& x) {
    double total = 0.0;
    for (double v : x.values()) {
        total += v;
    }
    return Tensor::make({1}, {total}, {x},
                        [](Node& self) {
                            auto& g = self.parents[0]->grad_buffer();
                            for (double& gi : g) {
                                gi += self.grad[0];
                            }
                        },
                        "sum");
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor gather_sum(const Tensor& x, std::span<const std::size_t> indices) {
    double total = 0.0;
    auto xv = x.values();
    for (std::size_t idx : indices) {
        if (idx >= xv.size()) {
            throw ConfigError("gather_sum: index " + std::to_string(idx) + " outside tensor of " +
                              std::to_string(xv.size()) + " elements");
        }
        total += xv[idx];
    }
    return Tensor::make({1}, {total}, {x},
                        [idx = std::vector<std::size_t>(indices.begin(), indices.end())](Node& self) {
                            auto& g = self.parents[0]->grad_buffer();
                            for (std::size_t i : idx) {
                                g[i] += self.grad[0];
                            }
                        },
                        "gather_sum");
}

Tensor add_n(std::span<const Tensor> scalars) {
    if (scalars.empty()) {
        return Tensor::scalar(0.0);
    }
    double total = 0.0;
    for (const auto& s : scalars) {
        total += s.item();
    }
    return Tensor::make({1}, {total}, {scalars.begin(), scalars.end()},
                        [](Node& self) {
                            for (auto& p : self.parents) {
                                if (p->requires_grad) {
                                    p->grad_buffer()[0] += self.grad[0];
                                }
                            }
                        },
                        "add_n");
}

}  // namespace theta::diff
