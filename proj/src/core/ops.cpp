#include "vivqa/core/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "vivqa/core/errors.hpp"

namespace vivqa::ops {

using detail::ImplPtr;
using detail::make_result;
using detail::TensorImpl;

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
}

// Row-major strides.
std::vector<std::size_t> strides_of(const Shape& shape) {
    std::vector<std::size_t> s(shape.size(), 1);
    for (std::size_t i = shape.size(); i-- > 1;) s[i - 1] = s[i] * shape[i];
    return s;
}

std::size_t prod(const Shape& shape, std::size_t from, std::size_t to) {
    std::size_t n = 1;
    for (std::size_t i = from; i < to; ++i) n *= shape[i];
    return n;
}

void accumulate(TensorImpl* impl, const std::vector<double>& g) {
    if (!impl->requires_grad) return;
    auto& dst = impl->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul: cannot multiply " + shape_str(a.shape()) + " by " + shape_str(b.shape()));
    }
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<double> out(m * n, 0.0);
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    for (std::size_t i = 0; i < m; ++i) {
        double* row = out.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = pa[i * k + p];
            if (av == 0.0) continue;
            const double* brow = pb + p * n;
            for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
        }
    }
    TensorImpl* ai = a.impl().get();
    TensorImpl* bi = b.impl().get();
    return make_result({m, n}, std::move(out), {a.impl(), b.impl()},
                       [ai, bi, m, k, n](const std::vector<double>& g) {
                           if (ai->requires_grad) {
                               auto& da = ai->ensure_grad();
                               const double* pb = bi->data.data();
                               for (std::size_t i = 0; i < m; ++i) {
                                   const double* grow = g.data() + i * n;
                                   for (std::size_t p = 0; p < k; ++p) {
                                       const double* brow = pb + p * n;
                                       double acc = 0.0;
                                       for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                                       da[i * k + p] += acc;
                                   }
                               }
                           }
                           if (bi->requires_grad) {
                               auto& db = bi->ensure_grad();
                               const double* pa = ai->data.data();
                               for (std::size_t i = 0; i < m; ++i) {
                                   const double* grow = g.data() + i * n;
                                   for (std::size_t p = 0; p < k; ++p) {
                                       const double av = pa[i * k + p];
                                       if (av == 0.0) continue;
                                       double* drow = db.data() + p * n;
                                       for (std::size_t j = 0; j < n; ++j) drow[j] += av * grow[j];
                                   }
                               }
                           }
                       });
}

Tensor map_binary(const Tensor& a, const Tensor& b, BinaryOp op) {
    require_same_shape(a, b, "map_binary");
    const std::size_t n = a.numel();
    std::vector<double> out(n);
    const auto da = a.data();
    const auto db = b.data();
    switch (op) {
        case BinaryOp::add:
            for (std::size_t i = 0; i < n; ++i) out[i] = da[i] + db[i];
            break;
        case BinaryOp::sub:
            for (std::size_t i = 0; i < n; ++i) out[i] = da[i] - db[i];
            break;
        case BinaryOp::mul:
            for (std::size_t i = 0; i < n; ++i) out[i] = da[i] * db[i];
            break;
    }
    TensorImpl* ai = a.impl().get();
    TensorImpl* bi = b.impl().get();
    return make_result(a.shape(), std::move(out), {a.impl(), b.impl()},
                       [ai, bi, op, n](const std::vector<double>& g) {
                           if (ai->requires_grad) {
                               auto& ga = ai->ensure_grad();
                               if (op == BinaryOp::mul) {
                                   for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * bi->data[i];
                               } else {
                                   for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
                               }
                           }
                           if (bi->requires_grad) {
                               auto& gb = bi->ensure_grad();
                               switch (op) {
                                   case BinaryOp::add:
                                       for (std::size_t i = 0; i < n; ++i) gb[i] += g[i];
                                       break;
                                   case BinaryOp::sub:
                                       for (std::size_t i = 0; i < n; ++i) gb[i] -= g[i];
                                       break;
                                   case BinaryOp::mul:
                                       for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * ai->data[i];
                                       break;
                               }
                           }
                       });
}

Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
    const std::size_t n = bias.numel();
    if (x.rank() == 0 || x.shape().back() != n) {
        throw ShapeError("add_row_bias: bias " + shape_str(bias.shape()) + " does not match rows of " +
                         shape_str(x.shape()));
    }
    const std::size_t rows = x.numel() / n;
    std::vector<double> out(x.data().begin(), x.data().end());
    const auto pb = bias.data();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < n; ++j) out[r * n + j] += pb[j];
    }
    TensorImpl* xi = x.impl().get();
    TensorImpl* bi = bias.impl().get();
    return make_result(x.shape(), std::move(out), {x.impl(), bias.impl()},
                       [xi, bi, rows, n](const std::vector<double>& g) {
                           accumulate(xi, g);
                           if (bi->requires_grad) {
                               auto& gb = bi->ensure_grad();
                               for (std::size_t r = 0; r < rows; ++r) {
                                   for (std::size_t j = 0; j < n; ++j) gb[j] += g[r * n + j];
                               }
                           }
                       });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    return add_row_bias(matmul(x, weight), bias);
}

Tensor scale(const Tensor& x, double factor) {
    std::vector<double> out(x.data().begin(), x.data().end());
    for (double& v : out) v *= factor;
    TensorImpl* xi = x.impl().get();
    return make_result(x.shape(), std::move(out), {x.impl()}, [xi, factor](const std::vector<double>& g) {
        auto& gx = xi->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += factor * g[i];
    });
}

Tensor sum(const Tensor& x) {
    double total = 0.0;
    for (double v : x.data()) total += v;
    TensorImpl* xi = x.impl().get();
    return make_result({1}, {total}, {x.impl()}, [xi](const std::vector<double>& g) {
        auto& gx = xi->ensure_grad();
        for (double& v : gx) v += g[0];
    });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
    if (parts.empty()) throw ArgumentError("concat: no parts");
    const Shape& first = parts.front().shape();
    if (axis >= first.size()) throw ArgumentError("concat: axis out of range for " + shape_str(first));
    Shape out_shape = first;
    out_shape[axis] = 0;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        bool ok = s.size() == first.size();
        for (std::size_t i = 0; ok && i < s.size(); ++i) {
            if (i != axis && s[i] != first[i]) ok = false;
        }
        if (!ok) {
            throw ShapeError("concat: incompatible parts " + shape_str(first) + " and " + shape_str(s) +
                             " on axis " + std::to_string(axis));
        }
        out_shape[axis] += s[axis];
    }
    const std::size_t outer = prod(first, 0, axis);
    const std::size_t inner = prod(first, axis + 1, first.size());
    const std::size_t out_block = out_shape[axis] * inner;
    std::vector<double> out(shape_numel(out_shape));
    std::vector<ImplPtr> inputs;
    std::vector<std::size_t> offsets;
    std::size_t offset = 0;
    for (const auto& p : parts) {
        const std::size_t block = p.dim(axis) * inner;
        const auto src = p.data();
        for (std::size_t o = 0; o < outer; ++o) {
            std::copy_n(src.begin() + o * block, block, out.begin() + o * out_block + offset);
        }
        inputs.push_back(p.impl());
        offsets.push_back(offset);
        offset += block;
    }
    std::vector<TensorImpl*> raw;
    for (const auto& in : inputs) raw.push_back(in.get());
    return make_result(out_shape, std::move(out), inputs,
                       [raw, offsets, outer, inner, out_block, axis](const std::vector<double>& g) {
                           for (std::size_t i = 0; i < raw.size(); ++i) {
                               if (!raw[i]->requires_grad) continue;
                               auto& gp = raw[i]->ensure_grad();
                               const std::size_t block = raw[i]->shape[axis] * inner;
                               for (std::size_t o = 0; o < outer; ++o) {
                                   const double* src = g.data() + o * out_block + offsets[i];
                                   double* dst = gp.data() + o * block;
                                   for (std::size_t j = 0; j < block; ++j) dst[j] += src[j];
                               }
                           }
                       });
}

Tensor slice(const Tensor& t, std::size_t axis, std::size_t begin, std::size_t end) {
    const Shape& s = t.shape();
    if (axis >= s.size()) throw ArgumentError("slice: axis out of range for " + shape_str(s));
    if (begin > end || end > s[axis]) {
        throw IndexError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") outside axis of length " + std::to_string(s[axis]));
    }
    Shape out_shape = s;
    out_shape[axis] = end - begin;
    const std::size_t outer = prod(s, 0, axis);
    const std::size_t inner = prod(s, axis + 1, s.size());
    const std::size_t in_block = s[axis] * inner;
    const std::size_t out_block = (end - begin) * inner;
    const std::size_t start = begin * inner;
    std::vector<double> out(outer * out_block);
    const auto src = t.data();
    for (std::size_t o = 0; o < outer; ++o) {
        std::copy_n(src.begin() + o * in_block + start, out_block, out.begin() + o * out_block);
    }
    TensorImpl* ti = t.impl().get();
    return make_result(out_shape, std::move(out), {t.impl()},
                       [ti, outer, in_block, out_block, start](const std::vector<double>& g) {
                           auto& gt = ti->ensure_grad();
                           for (std::size_t o = 0; o < outer; ++o) {
                               for (std::size_t j = 0; j < out_block; ++j) {
                                   gt[o * in_block + start + j] += g[o * out_block + j];
                               }
                           }
                       });
}

Tensor permute(const Tensor& t, const std::vector<std::size_t>& axes) {
    const Shape& s = t.shape();
    const std::size_t r = s.size();
    if (axes.size() != r) throw ArgumentError("permute: expected " + std::to_string(r) + " axes");
    std::vector<bool> seen(r, false);
    for (std::size_t a : axes) {
        if (a >= r || seen[a]) throw ArgumentError("permute: axes are not a permutation of 0.." + std::to_string(r - 1));
        seen[a] = true;
    }
    Shape out_shape(r);
    for (std::size_t i = 0; i < r; ++i) out_shape[i] = s[axes[i]];
    const auto in_strides = strides_of(s);
    // Stride in the input for each output axis.
    std::vector<std::size_t> src_stride(r);
    for (std::size_t i = 0; i < r; ++i) src_stride[i] = in_strides[axes[i]];

    const std::size_t n = t.numel();
    // mapping[out_flat] = in_flat, shared by forward and backward.
    auto mapping = std::make_shared<std::vector<std::size_t>>(n);
    std::vector<std::size_t> idx(r, 0);
    std::size_t src = 0;
    for (std::size_t o = 0; o < n; ++o) {
        (*mapping)[o] = src;
        for (std::size_t ax = r; ax-- > 0;) {
            ++idx[ax];
            src += src_stride[ax];
            if (idx[ax] < out_shape[ax]) break;
            src -= src_stride[ax] * out_shape[ax];
            idx[ax] = 0;
        }
    }
    std::vector<double> out(n);
    const auto in = t.data();
    for (std::size_t o = 0; o < n; ++o) out[o] = in[(*mapping)[o]];
    TensorImpl* ti = t.impl().get();
    return make_result(out_shape, std::move(out), {t.impl()}, [ti, mapping](const std::vector<double>& g) {
        auto& gt = ti->ensure_grad();
        for (std::size_t o = 0; o < g.size(); ++o) gt[(*mapping)[o]] += g[o];
    });
}

Tensor transpose(const Tensor& t) {
    if (t.rank() != 2) throw ShapeError("transpose: expected rank 2, got " + shape_str(t.shape()));
    return permute(t, {1, 0});
}

Tensor reshape(const Tensor& t, Shape shape) {
    if (shape_numel(shape) != t.numel()) {
        throw ShapeError("reshape: cannot view " + shape_str(t.shape()) + " as " + shape_str(shape));
    }
    TensorImpl* ti = t.impl().get();
    return make_result(std::move(shape), t.to_vector(), {t.impl()},
                       [ti](const std::vector<double>& g) { accumulate(ti, g); });
}

Tensor flatten(const Tensor& t, std::size_t keep_axis) {
    if (t.rank() < 2) throw ShapeError("flatten: rank >= 2 required, got " + shape_str(t.shape()));
    if (keep_axis >= t.rank()) throw ArgumentError("flatten: keep_axis out of range");
    const std::size_t keep = t.dim(keep_axis);
    const std::size_t rest = t.numel() / keep;
    if (keep_axis == 0) return reshape(t, {keep, rest});
    std::vector<std::size_t> axes{keep_axis};
    for (std::size_t i = 0; i < t.rank(); ++i) {
        if (i != keep_axis) axes.push_back(i);
    }
    return reshape(permute(t, axes), {keep, rest});
}

PoolWindow pool_window(std::size_t out_index, std::size_t in_size, std::size_t out_size) {
    const std::size_t begin = (out_index * in_size) / out_size;
    const std::size_t end = ((out_index + 1) * in_size + out_size - 1) / out_size;
    return {begin, end};
}

Tensor adaptive_avg_pool(const Tensor& t, const std::vector<std::size_t>& target_sizes) {
    const Shape& s = t.shape();
    const std::size_t q = target_sizes.size();
    if (q == 0 || q > s.size()) throw ArgumentError("adaptive_avg_pool: need 1..rank target sizes");
    for (std::size_t m : target_sizes) {
        if (m == 0) throw ArgumentError("adaptive_avg_pool: target sizes must be positive");
    }
    const std::size_t lead = s.size() - q;
    const std::size_t outer = prod(s, 0, lead);
    Shape in_tail(s.begin() + static_cast<std::ptrdiff_t>(lead), s.end());
    const std::size_t in_block = shape_numel(in_tail);
    const std::size_t out_block = shape_numel(target_sizes);
    const auto in_strides = strides_of(in_tail);

    // For each output cell of the trailing block: contributing input offsets.
    struct Cell {
        std::vector<std::size_t> sources;
        double inv_count;
    };
    auto cells = std::make_shared<std::vector<Cell>>(out_block);
    std::vector<std::size_t> oidx(q, 0);
    for (std::size_t o = 0; o < out_block; ++o) {
        std::vector<PoolWindow> win(q);
        for (std::size_t a = 0; a < q; ++a) win[a] = pool_window(oidx[a], in_tail[a], target_sizes[a]);
        Cell& cell = (*cells)[o];
        std::vector<std::size_t> widx(q);
        for (std::size_t a = 0; a < q; ++a) widx[a] = win[a].begin;
        while (true) {
            std::size_t off = 0;
            for (std::size_t a = 0; a < q; ++a) off += widx[a] * in_strides[a];
            cell.sources.push_back(off);
            std::size_t a = q;
            while (a-- > 0) {
                if (++widx[a] < win[a].end) break;
                widx[a] = win[a].begin;
            }
            if (a == static_cast<std::size_t>(-1)) break;
        }
        cell.inv_count = 1.0 / static_cast<double>(cell.sources.size());
        for (std::size_t a = q; a-- > 0;) {
            if (++oidx[a] < target_sizes[a]) break;
            oidx[a] = 0;
        }
    }

    Shape out_shape(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(lead));
    out_shape.insert(out_shape.end(), target_sizes.begin(), target_sizes.end());
    std::vector<double> out(outer * out_block);
    const auto in = t.data();
    for (std::size_t b = 0; b < outer; ++b) {
        const double* src = in.data() + b * in_block;
        for (std::size_t o = 0; o < out_block; ++o) {
            const Cell& cell = (*cells)[o];
            double acc = 0.0;
            for (std::size_t off : cell.sources) acc += src[off];
            out[b * out_block + o] = acc * cell.inv_count;
        }
    }
    TensorImpl* ti = t.impl().get();
    return make_result(out_shape, std::move(out), {t.impl()},
                       [ti, cells, outer, in_block, out_block](const std::vector<double>& g) {
                           auto& gt = ti->ensure_grad();
                           for (std::size_t b = 0; b < outer; ++b) {
                               double* dst = gt.data() + b * in_block;
                               for (std::size_t o = 0; o < out_block; ++o) {
                                   const Cell& cell = (*cells)[o];
                                   const double share = g[b * out_block + o] * cell.inv_count;
                                   for (std::size_t off : cell.sources) dst[off] += share;
                               }
                           }
                       });
}

Tensor softmax(const Tensor& t, std::size_t axis) {
    const Shape& s = t.shape();
    if (axis >= s.size()) throw ArgumentError("softmax: axis " + std::to_string(axis) + " not in " + shape_str(s));
    const std::size_t outer = prod(s, 0, axis);
    const std::size_t n = s[axis];
    const std::size_t inner = prod(s, axis + 1, s.size());
    const auto in = t.data();
    auto out = std::make_shared<std::vector<double>>(t.numel());
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < inner; ++i) {
            const std::size_t base = o * n * inner + i;
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, in[base + j * inner]);
            double z = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double e = std::exp(in[base + j * inner] - mx);
                (*out)[base + j * inner] = e;
                z += e;
            }
            for (std::size_t j = 0; j < n; ++j) (*out)[base + j * inner] /= z;
        }
    }
    TensorImpl* ti = t.impl().get();
    std::vector<double> values = *out;
    return make_result(s, std::move(values), {t.impl()}, [ti, out, outer, n, inner](const std::vector<double>& g) {
        auto& gt = ti->ensure_grad();
        const auto& y = *out;
        for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t i = 0; i < inner; ++i) {
                const std::size_t base = o * n * inner + i;
                double dot = 0.0;
                for (std::size_t j = 0; j < n; ++j) dot += g[base + j * inner] * y[base + j * inner];
                for (std::size_t j = 0; j < n; ++j) {
                    const std::size_t k = base + j * inner;
                    gt[k] += y[k] * (g[k] - dot);
                }
            }
        }
    });
}

Tensor gelu(const Tensor& t) {
    const auto in = t.data();
    std::vector<double> out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) {
        const double x = in[i];
        out[i] = x * 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0);
    }
    TensorImpl* ti = t.impl().get();
    return make_result(t.shape(), std::move(out), {t.impl()}, [ti](const std::vector<double>& g) {
        auto& gt = ti->ensure_grad();
        const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double x = ti->data[i];
            const double cdf = 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0);
            const double pdf = inv_sqrt_2pi * std::exp(-0.5 * x * x);
            gt[i] += g[i] * (cdf + x * pdf);
        }
    });
}

Tensor tanh(const Tensor& t) {
    const auto in = t.data();
    auto out = std::make_shared<std::vector<double>>(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) (*out)[i] = std::tanh(in[i]);
    TensorImpl* ti = t.impl().get();
    std::vector<double> values = *out;
    return make_result(t.shape(), std::move(values), {t.impl()}, [ti, out](const std::vector<double>& g) {
        auto& gt = ti->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double y = (*out)[i];
            gt[i] += g[i] * (1.0 - y * y);
        }
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    if (x.rank() == 0) throw ShapeError("layer_norm: empty shape");
    const std::size_t d = x.shape().back();
    if (gamma.numel() != d || beta.numel() != d) {
        throw ShapeError("layer_norm: gamma/beta " + shape_str(gamma.shape()) + "/" + shape_str(beta.shape()) +
                         " do not match last axis of " + shape_str(x.shape()));
    }
    const std::size_t rows = x.numel() / d;
    const auto in = x.data();
    const auto pg = gamma.data();
    const auto pb = beta.data();
    auto xhat = std::make_shared<std::vector<double>>(x.numel());
    auto rstd = std::make_shared<std::vector<double>>(rows);
    std::vector<double> out(x.numel());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = in.data() + r * d;
        double mean = 0.0;
        for (std::size_t j = 0; j < d; ++j) mean += row[j];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
        var /= static_cast<double>(d);
        const double rs = 1.0 / std::sqrt(var + eps);
        (*rstd)[r] = rs;
        for (std::size_t j = 0; j < d; ++j) {
            const double h = (row[j] - mean) * rs;
            (*xhat)[r * d + j] = h;
            out[r * d + j] = h * pg[j] + pb[j];
        }
    }
    TensorImpl* xi = x.impl().get();
    TensorImpl* gi = gamma.impl().get();
    TensorImpl* bi = beta.impl().get();
    return make_result(x.shape(), std::move(out), {x.impl(), gamma.impl(), beta.impl()},
                       [xi, gi, bi, xhat, rstd, rows, d](const std::vector<double>& g) {
                           const auto& h = *xhat;
                           if (gi->requires_grad) {
                               auto& gg = gi->ensure_grad();
                               for (std::size_t r = 0; r < rows; ++r) {
                                   for (std::size_t j = 0; j < d; ++j) gg[j] += g[r * d + j] * h[r * d + j];
                               }
                           }
                           if (bi->requires_grad) {
                               auto& gb = bi->ensure_grad();
                               for (std::size_t r = 0; r < rows; ++r) {
                                   for (std::size_t j = 0; j < d; ++j) gb[j] += g[r * d + j];
                               }
                           }
                           if (xi->requires_grad) {
                               auto& gx = xi->ensure_grad();
                               const double inv_d = 1.0 / static_cast<double>(d);
                               for (std::size_t r = 0; r < rows; ++r) {
                                   double mean_dh = 0.0;
                                   double mean_dh_h = 0.0;
                                   for (std::size_t j = 0; j < d; ++j) {
                                       const double dh = g[r * d + j] * gi->data[j];
                                       mean_dh += dh;
                                       mean_dh_h += dh * h[r * d + j];
                                   }
                                   mean_dh *= inv_d;
                                   mean_dh_h *= inv_d;
                                   for (std::size_t j = 0; j < d; ++j) {
                                       const double dh = g[r * d + j] * gi->data[j];
                                       gx[r * d + j] += (*rstd)[r] * (dh - mean_dh - h[r * d + j] * mean_dh_h);
                                   }
                               }
                           }
                       });
}

Tensor embedding_lookup(const Tensor& table, std::span<const std::size_t> ids) {
    if (table.rank() != 2) throw ShapeError("embedding_lookup: table must be rank 2, got " + shape_str(table.shape()));
    const std::size_t vocab = table.dim(0);
    const std::size_t d = table.dim(1);
    for (std::size_t id : ids) {
        if (id >= vocab) {
            throw IndexError("embedding_lookup: id " + std::to_string(id) + " out of range for vocabulary of " +
                             std::to_string(vocab));
        }
    }
    std::vector<double> out(ids.size() * d);
    const auto src = table.data();
    for (std::size_t i = 0; i < ids.size(); ++i) {
        std::copy_n(src.begin() + ids[i] * d, d, out.begin() + i * d);
    }
    TensorImpl* ti = table.impl().get();
    std::vector<std::size_t> ids_copy(ids.begin(), ids.end());
    return make_result({ids.size(), d}, std::move(out), {table.impl()},
                       [ti, ids_copy, d](const std::vector<double>& g) {
                           auto& gt = ti->ensure_grad();
                           for (std::size_t i = 0; i < ids_copy.size(); ++i) {
                               for (std::size_t j = 0; j < d; ++j) gt[ids_copy[i] * d + j] += g[i * d + j];
                           }
                       });
}

Tensor cross_entropy(const Tensor& logits, std::size_t target) {
    const std::size_t c = logits.numel();
    if (target >= c) {
        throw IndexError("cross_entropy: target " + std::to_string(target) + " out of range for " +
                         std::to_string(c) + " classes");
    }
    const auto l = logits.data();
    const auto top = static_cast<std::size_t>(std::max_element(l.begin(), l.end()) - l.begin());
    const double mx = l[top];
    // log-sum-exp as mx + log1p(rest): keeps full precision when one logit dominates
    double rest = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
        if (i != top) rest += std::exp(l[i] - mx);
    }
    const double lse = mx + std::log1p(rest);
    const double loss = (mx - l[target]) + std::log1p(rest);
    TensorImpl* li = logits.impl().get();
    return make_result({1}, {loss}, {logits.impl()}, [li, target, lse](const std::vector<double>& g) {
        auto& gl = li->ensure_grad();
        for (std::size_t i = 0; i < gl.size(); ++i) {
            const double p = std::exp(li->data[i] - lse);
            gl[i] += g[0] * (p - (i == target ? 1.0 : 0.0));
        }
    });
}

Tensor drop_path(const Tensor& x, double rate, bool training, RngStream& rng) {
    if (!(rate >= 0.0) || rate >= 1.0) throw ArgumentError("drop_path: rate must lie in [0, 1)");
    if (!training || rate == 0.0) return x;
    const bool keep = rng.bernoulli(1.0 - rate);
    return scale(x, keep ? 1.0 / (1.0 - rate) : 0.0);
}

Tensor mask_columns(const Tensor& scores, const std::vector<bool>& key_mask) {
    if (scores.rank() != 2 || scores.dim(1) != key_mask.size()) {
        throw ShapeError("mask_columns: mask of length " + std::to_string(key_mask.size()) +
                         " does not match " + shape_str(scores.shape()));
    }
    const std::size_t rows = scores.dim(0);
    const std::size_t cols = scores.dim(1);
    std::vector<double> out(scores.data().begin(), scores.data().end());
    std::vector<bool> mask = key_mask;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            if (!mask[c]) out[r * cols + c] = -std::numeric_limits<double>::infinity();
        }
    }
    TensorImpl* si = scores.impl().get();
    return make_result(scores.shape(), std::move(out), {scores.impl()},
                       [si, mask, rows, cols](const std::vector<double>& g) {
                           auto& gs = si->ensure_grad();
                           for (std::size_t r = 0; r < rows; ++r) {
                               for (std::size_t c = 0; c < cols; ++c) {
                                   if (mask[c]) gs[r * cols + c] += g[r * cols + c];
                               }
                           }
                       });
}

}  // namespace vivqa::ops
