/* Copyright 2026 The StructPrune Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "structprune/exec.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace structprune {

namespace {

bool is_running_stat(const std::string& name) {
  return name == "running_mean" || name == "running_var";
}

Shape activation_shape(std::int64_t batch, const FeatureShape& s) {
  if (s.flat) return {batch, s.c};
  return {batch, s.c, s.h, s.w};
}

struct ConvGeometry {
  std::int64_t in_c, in_h, in_w, out_c, out_h, out_w, kernel, stride, padding;
  std::int64_t rows() const { return in_c * kernel * kernel; }
  std::int64_t pixels() const { return out_h * out_w; }
};

void im2col(const double* x, const ConvGeometry& g, double* col) {
  const std::int64_t P = g.pixels();
  for (std::int64_t c = 0; c < g.in_c; ++c) {
    for (std::int64_t ky = 0; ky < g.kernel; ++ky) {
      for (std::int64_t kx = 0; kx < g.kernel; ++kx) {
        double* row = col + ((c * g.kernel + ky) * g.kernel + kx) * P;
        for (std::int64_t oy = 0; oy < g.out_h; ++oy) {
          const std::int64_t iy = oy * g.stride - g.padding + ky;
          double* dst = row + oy * g.out_w;
          if (iy < 0 || iy >= g.in_h) {
            std::fill(dst, dst + g.out_w, 0.0);
            continue;
          }
          const double* src = x + (c * g.in_h + iy) * g.in_w;
          for (std::int64_t ox = 0; ox < g.out_w; ++ox) {
            const std::int64_t ix = ox * g.stride - g.padding + kx;
            dst[ox] = (ix >= 0 && ix < g.in_w) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const double* col, const ConvGeometry& g, double* dx) {
  const std::int64_t P = g.pixels();
  for (std::int64_t c = 0; c < g.in_c; ++c) {
    for (std::int64_t ky = 0; ky < g.kernel; ++ky) {
      for (std::int64_t kx = 0; kx < g.kernel; ++kx) {
        const double* row = col + ((c * g.kernel + ky) * g.kernel + kx) * P;
        for (std::int64_t oy = 0; oy < g.out_h; ++oy) {
          const std::int64_t iy = oy * g.stride - g.padding + ky;
          if (iy < 0 || iy >= g.in_h) continue;
          double* dst = dx + (c * g.in_h + iy) * g.in_w;
          const double* src = row + oy * g.out_w;
          for (std::int64_t ox = 0; ox < g.out_w; ++ox) {
            const std::int64_t ix = ox * g.stride - g.padding + kx;
            if (ix >= 0 && ix < g.in_w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

ConvGeometry conv_geometry(const ModelGraph& m, std::size_t i) {
  const LayerAttrs& a = m.node(i).attrs;
  const FeatureShape& in = m.input_shape(i);
  const FeatureShape& out = m.output_shape(i);
  return {in.c, in.h, in.w, out.c, out.h, out.w, a.kernel, a.stride, a.padding};
}

}  // namespace

ParamSet ParamSet::from_model(const ModelGraph& model) {
  ParamSet p;
  p.nodes.resize(model.size());
  for (std::size_t i = 0; i < model.size(); ++i) {
    for (const auto& [name, t] : model.node(i).params) {
      p.nodes[i].emplace(name, std::vector<double>(t.data().begin(), t.data().end()));
    }
  }
  return p;
}

ParamSet ParamSet::zeros_for_gradients(const ModelGraph& model) {
  ParamSet p;
  p.nodes.resize(model.size());
  for (std::size_t i = 0; i < model.size(); ++i) {
    for (const auto& [name, t] : model.node(i).params) {
      if (is_running_stat(name)) continue;
      p.nodes[i].emplace(name, std::vector<double>(static_cast<std::size_t>(t.numel()), 0.0));
    }
  }
  return p;
}

std::vector<double>& ParamSet::at(std::size_t node, const std::string& name) {
  return nodes.at(node).at(name);
}

const std::vector<double>& ParamSet::at(std::size_t node, const std::string& name) const {
  return nodes.at(node).at(name);
}

bool ParamSet::has(std::size_t node, const std::string& name) const {
  return node < nodes.size() && nodes[node].contains(name);
}

ParamSet& ParamSet::operator+=(const ParamSet& other) {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (auto& [name, v] : nodes[i]) {
      const auto& o = other.nodes.at(i).at(name);
      for (std::size_t k = 0; k < v.size(); ++k) v[k] += o[k];
    }
  }
  return *this;
}

ParamSet& ParamSet::operator*=(double s) {
  for (auto& node : nodes) {
    for (auto& [name, v] : node) {
      for (double& x : v) x *= s;
    }
  }
  return *this;
}

ModelGraph ParamSet::apply_to(const ModelGraph& model) const {
  std::vector<LayerNode> out = model.nodes();
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (auto& [name, t] : out[i].params) {
      auto it = nodes.at(i).find(name);
      if (it == nodes[i].end()) continue;
      auto& dst = t.storage();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = static_cast<float>(it->second[k]);
    }
  }
  return model.with_nodes(std::move(out));
}

Executor::Executor(ModelGraph model)
    : model_(std::move(model)), params_(ParamSet::from_model(model_)) {}

Executor::Executor(ModelGraph model, ParamSet params)
    : model_(std::move(model)), params_(std::move(params)) {}

ExecutionRecord Executor::forward(const Dataset& batch, Mode mode) const {
  const ModelGraph& m = model_;
  const Shape& in_shape = batch.inputs.shape();
  const Shape& expect = m.metadata().input_shape;
  if (in_shape.size() != 4 || in_shape[1] != expect[0] || in_shape[2] != expect[1] ||
      in_shape[3] != expect[2]) {
    throw ShapeError("batch shape " + shape_to_string(in_shape) +
                     " does not match model input " + shape_to_string(expect));
  }
  const std::int64_t B = in_shape[0];
  ExecutionRecord rec;
  rec.mode = mode;
  rec.batch = B;
  rec.labels = batch.labels;
  rec.input = batch.inputs.cast<double>();
  rec.activations.resize(m.size());

  for (std::size_t i : m.topo_order()) {
    const LayerNode& n = m.node(i);
    const auto& preds = m.inputs_of(i);
    Tensor64 out(activation_shape(B, m.output_shape(i)));
    auto& y = out.storage();
    if (n.kind == LayerKind::kInput) {
      out = rec.input;
      rec.activations[i] = std::move(out);
      continue;
    }
    const Tensor64& xin = rec.activations[preds.front()];
    const auto& x = xin.storage();
    const FeatureShape& is = m.input_shape(i);
    const FeatureShape& os = m.output_shape(i);
    switch (n.kind) {
      case LayerKind::kConv2d: {
        const ConvGeometry g = conv_geometry(m, i);
        const auto& w = params_.at(i, "weight");
        const std::vector<double>* bias = n.attrs.bias ? &params_.at(i, "bias") : nullptr;
        const std::int64_t R = g.rows(), P = g.pixels();
        std::vector<double> col(static_cast<std::size_t>(R * P));
        for (std::int64_t b = 0; b < B; ++b) {
          im2col(x.data() + b * is.numel(), g, col.data());
          double* yb = y.data() + b * os.numel();
          for (std::int64_t o = 0; o < g.out_c; ++o) {
            double* yo = yb + o * P;
            std::fill(yo, yo + P, bias ? (*bias)[static_cast<std::size_t>(o)] : 0.0);
            const double* wo = w.data() + o * R;
            for (std::int64_t r = 0; r < R; ++r) {
              const double wv = wo[r];
              const double* cr = col.data() + r * P;
              for (std::int64_t p = 0; p < P; ++p) yo[p] += wv * cr[p];
            }
          }
        }
        break;
      }
      case LayerKind::kLinear: {
        const auto& w = params_.at(i, "weight");
        const std::int64_t N = n.attrs.in_channels, M = n.attrs.out_channels;
        const std::vector<double>* bias = n.attrs.bias ? &params_.at(i, "bias") : nullptr;
        for (std::int64_t b = 0; b < B; ++b) {
          const double* xb = x.data() + b * N;
          for (std::int64_t o = 0; o < M; ++o) {
            double acc = bias ? (*bias)[static_cast<std::size_t>(o)] : 0.0;
            const double* wo = w.data() + o * N;
            for (std::int64_t k = 0; k < N; ++k) acc += wo[k] * xb[k];
            y[static_cast<std::size_t>(b * M + o)] = acc;
          }
        }
        break;
      }
      case LayerKind::kBatchNorm2d: {
        const std::int64_t C = is.c, HW = is.h * is.w;
        const double count = static_cast<double>(B * HW);
        ExecutionRecord::NormCache cache;
        cache.mean.assign(static_cast<std::size_t>(C), 0.0);
        cache.var.assign(static_cast<std::size_t>(C), 0.0);
        cache.inv_std.assign(static_cast<std::size_t>(C), 0.0);
        const auto& gamma = params_.at(i, "gamma");
        const auto& beta = params_.at(i, "beta");
        for (std::int64_t c = 0; c < C; ++c) {
          const auto cu = static_cast<std::size_t>(c);
          if (mode == Mode::kTrain) {
            double sum = 0.0;
            for (std::int64_t b = 0; b < B; ++b) {
              const double* xc = x.data() + (b * C + c) * HW;
              for (std::int64_t p = 0; p < HW; ++p) sum += xc[p];
            }
            const double mean = sum / count;
            double sq = 0.0;
            for (std::int64_t b = 0; b < B; ++b) {
              const double* xc = x.data() + (b * C + c) * HW;
              for (std::int64_t p = 0; p < HW; ++p) sq += (xc[p] - mean) * (xc[p] - mean);
            }
            cache.mean[cu] = mean;
            cache.var[cu] = sq / count;
          } else {
            cache.mean[cu] = params_.at(i, "running_mean")[cu];
            cache.var[cu] = params_.at(i, "running_var")[cu];
          }
          cache.inv_std[cu] = 1.0 / std::sqrt(cache.var[cu] + n.attrs.epsilon);
          for (std::int64_t b = 0; b < B; ++b) {
            const double* xc = x.data() + (b * C + c) * HW;
            double* yc = y.data() + (b * C + c) * HW;
            for (std::int64_t p = 0; p < HW; ++p) {
              yc[p] = gamma[cu] * (xc[p] - cache.mean[cu]) * cache.inv_std[cu] + beta[cu];
            }
          }
        }
        rec.norm.emplace(i, std::move(cache));
        break;
      }
      case LayerKind::kRelu:
        for (std::size_t k = 0; k < y.size(); ++k) y[k] = x[k] > 0.0 ? x[k] : 0.0;
        break;
      case LayerKind::kMaxPool2d:
      case LayerKind::kAvgPool2d: {
        const bool is_max = n.kind == LayerKind::kMaxPool2d;
        const LayerAttrs& a = n.attrs;
        std::vector<std::int64_t> argmax;
        if (is_max) argmax.assign(y.size(), -1);
        const double inv_area = 1.0 / static_cast<double>(a.kernel * a.kernel);
        for (std::int64_t bc = 0; bc < B * is.c; ++bc) {
          const double* xp = x.data() + bc * is.h * is.w;
          for (std::int64_t oy = 0; oy < os.h; ++oy) {
            for (std::int64_t ox = 0; ox < os.w; ++ox) {
              double best = -std::numeric_limits<double>::infinity();
              std::int64_t best_at = -1;
              double sum = 0.0;
              for (std::int64_t ky = 0; ky < a.kernel; ++ky) {
                const std::int64_t iy = oy * a.stride - a.padding + ky;
                if (iy < 0 || iy >= is.h) continue;
                for (std::int64_t kx = 0; kx < a.kernel; ++kx) {
                  const std::int64_t ix = ox * a.stride - a.padding + kx;
                  if (ix < 0 || ix >= is.w) continue;
                  const double v = xp[iy * is.w + ix];
                  sum += v;
                  if (v > best) {
                    best = v;
                    best_at = bc * is.h * is.w + iy * is.w + ix;
                  }
                }
              }
              const std::int64_t o = (bc * os.h + oy) * os.w + ox;
              if (is_max) {
                y[static_cast<std::size_t>(o)] = best;
                argmax[static_cast<std::size_t>(o)] = best_at;
              } else {
                y[static_cast<std::size_t>(o)] = sum * inv_area;
              }
            }
          }
        }
        if (is_max) rec.pool_argmax.emplace(i, std::move(argmax));
        break;
      }
      case LayerKind::kGlobalAvgPool: {
        const std::int64_t HW = is.h * is.w;
        for (std::int64_t bc = 0; bc < B * is.c; ++bc) {
          double sum = 0.0;
          for (std::int64_t p = 0; p < HW; ++p) sum += x[static_cast<std::size_t>(bc * HW + p)];
          y[static_cast<std::size_t>(bc)] = sum / static_cast<double>(HW);
        }
        break;
      }
      case LayerKind::kAdd: {
        const auto& x2 = rec.activations[preds[1]].storage();
        for (std::size_t k = 0; k < y.size(); ++k) y[k] = x[k] + x2[k];
        break;
      }
      case LayerKind::kFlatten:
      case LayerKind::kSoftmaxCrossEntropy:
      case LayerKind::kOutput:
        y = x;
        break;
      case LayerKind::kInput:
        break;
    }
    if (!out.all_finite()) throw NumericError("non-finite activation at node '" + n.id + "'");
    rec.activations[i] = std::move(out);
  }

  const FeatureShape& ls = m.output_shape(m.output_index());
  if (!rec.labels.empty()) {
    if (!ls.flat || ls.c != m.metadata().num_classes) {
      throw ShapeError("model output " + ls.to_string() + " is not a " +
                       std::to_string(m.metadata().num_classes) + "-class logit vector");
    }
    if (static_cast<std::int64_t>(rec.labels.size()) != B) {
      throw ShapeError("label count does not match batch size");
    }
    const auto& z = rec.activations[m.output_index()].storage();
    const std::int64_t K = ls.c;
    rec.sample_losses.resize(static_cast<std::size_t>(B));
    double total = 0.0;
    for (std::int64_t b = 0; b < B; ++b) {
      const double* zb = z.data() + b * K;
      const double mx = *std::max_element(zb, zb + K);
      double se = 0.0;
      for (std::int64_t k = 0; k < K; ++k) se += std::exp(zb[k] - mx);
      const double l = std::log(se) + mx - zb[rec.labels[static_cast<std::size_t>(b)]];
      rec.sample_losses[static_cast<std::size_t>(b)] = l;
      total += l;
    }
    rec.loss = total / static_cast<double>(B);
    if (!std::isfinite(rec.loss)) throw NumericError("loss is not finite");
  }
  return rec;
}

ParamSet Executor::backward(const ExecutionRecord& record) const {
  std::vector<double> w(static_cast<std::size_t>(record.batch),
                        1.0 / static_cast<double>(record.batch));
  return backward_weighted(record, w);
}

ParamSet Executor::backward_weighted(const ExecutionRecord& record,
                                     std::span<const double> weights) const {
  const ModelGraph& m = model_;
  if (record.activations.size() != m.size() || record.labels.empty()) {
    throw Error("backward needs a forward record with labels for this model");
  }
  const std::int64_t B = record.batch;
  if (static_cast<std::int64_t>(weights.size()) != B) {
    throw ShapeError("sample weight count does not match batch size");
  }
  ParamSet grads = ParamSet::zeros_for_gradients(m);
  std::vector<std::vector<double>> dact(m.size());

  // Seed: d(Σ w_b·loss_b)/dz = w_b·(softmax(z_b) − onehot).
  {
    const std::size_t out = m.output_index();
    const auto& z = record.activations[out].storage();
    const std::int64_t K = m.output_shape(out).c;
    auto& dz = dact[out];
    dz.assign(z.size(), 0.0);
    for (std::int64_t b = 0; b < B; ++b) {
      const double wb = weights[static_cast<std::size_t>(b)];
      if (wb == 0.0) continue;
      const double* zb = z.data() + b * K;
      const double mx = *std::max_element(zb, zb + K);
      double se = 0.0;
      for (std::int64_t k = 0; k < K; ++k) se += std::exp(zb[k] - mx);
      for (std::int64_t k = 0; k < K; ++k) {
        double p = std::exp(zb[k] - mx) / se;
        if (static_cast<std::uint32_t>(k) == record.labels[static_cast<std::size_t>(b)]) p -= 1.0;
        dz[static_cast<std::size_t>(b * K + k)] = wb * p;
      }
    }
  }

  auto accumulate = [&](std::size_t node) -> std::vector<double>& {
    auto& d = dact[node];
    if (d.empty()) d.assign(record.activations[node].storage().size(), 0.0);
    return d;
  };

  const auto& order = m.topo_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const std::size_t i = *it;
    const auto& dy = dact[i];
    if (dy.empty()) continue;  // no path to the loss
    const LayerNode& n = m.node(i);
    const auto& preds = m.inputs_of(i);
    if (preds.empty()) continue;
    const auto& x = record.activations[preds.front()].storage();
    const FeatureShape& is = m.input_shape(i);
    const FeatureShape& os = m.output_shape(i);
    switch (n.kind) {
      case LayerKind::kConv2d: {
        const ConvGeometry g = conv_geometry(m, i);
        const auto& w = params_.at(i, "weight");
        auto& dw = grads.at(i, "weight");
        const std::int64_t R = g.rows(), P = g.pixels();
        if (n.attrs.bias) {
          auto& db = grads.at(i, "bias");
          for (std::int64_t b = 0; b < B; ++b) {
            for (std::int64_t o = 0; o < g.out_c; ++o) {
              const double* d = dy.data() + (b * g.out_c + o) * P;
              double s = 0.0;
              for (std::int64_t p = 0; p < P; ++p) s += d[p];
              db[static_cast<std::size_t>(o)] += s;
            }
          }
        }
        auto& dx = accumulate(preds.front());
        std::vector<double> col(static_cast<std::size_t>(R * P));
        std::vector<double> dcol(static_cast<std::size_t>(R * P));
        for (std::int64_t b = 0; b < B; ++b) {
          const double* dyb = dy.data() + b * os.numel();
          im2col(x.data() + b * is.numel(), g, col.data());
          std::fill(dcol.begin(), dcol.end(), 0.0);
          for (std::int64_t o = 0; o < g.out_c; ++o) {
            const double* d = dyb + o * P;
            const double* wo = w.data() + o * R;
            double* dwo = dw.data() + o * R;
            for (std::int64_t r = 0; r < R; ++r) {
              const double* cr = col.data() + r * P;
              double* dcr = dcol.data() + r * P;
              double s = 0.0;
              const double wv = wo[r];
              for (std::int64_t p = 0; p < P; ++p) {
                s += d[p] * cr[p];
                dcr[p] += wv * d[p];
              }
              dwo[r] += s;
            }
          }
          col2im_add(dcol.data(), g, dx.data() + b * is.numel());
        }
        break;
      }
      case LayerKind::kLinear: {
        const auto& w = params_.at(i, "weight");
        auto& dw = grads.at(i, "weight");
        const std::int64_t N = n.attrs.in_channels, M = n.attrs.out_channels;
        auto& dx = accumulate(preds.front());
        std::vector<double>* db = n.attrs.bias ? &grads.at(i, "bias") : nullptr;
        for (std::int64_t b = 0; b < B; ++b) {
          const double* xb = x.data() + b * N;
          double* dxb = dx.data() + b * N;
          for (std::int64_t o = 0; o < M; ++o) {
            const double d = dy[static_cast<std::size_t>(b * M + o)];
            if (db) (*db)[static_cast<std::size_t>(o)] += d;
            if (d == 0.0) continue;
            const double* wo = w.data() + o * N;
            double* dwo = dw.data() + o * N;
            for (std::int64_t k = 0; k < N; ++k) {
              dwo[k] += d * xb[k];
              dxb[k] += d * wo[k];
            }
          }
        }
        break;
      }
      case LayerKind::kBatchNorm2d: {
        const auto& cache = record.norm.at(i);
        const std::int64_t C = is.c, HW = is.h * is.w;
        const double count = static_cast<double>(B * HW);
        const auto& gamma = params_.at(i, "gamma");
        auto& dgamma = grads.at(i, "gamma");
        auto& dbeta = grads.at(i, "beta");
        auto& dx = accumulate(preds.front());
        for (std::int64_t c = 0; c < C; ++c) {
          const auto cu = static_cast<std::size_t>(c);
          const double mean = cache.mean[cu], inv = cache.inv_std[cu];
          double sum_dy = 0.0, sum_dy_xhat = 0.0;
          for (std::int64_t b = 0; b < B; ++b) {
            const std::int64_t base = (b * C + c) * HW;
            for (std::int64_t p = 0; p < HW; ++p) {
              const double xhat = (x[static_cast<std::size_t>(base + p)] - mean) * inv;
              const double d = dy[static_cast<std::size_t>(base + p)];
              sum_dy += d;
              sum_dy_xhat += d * xhat;
            }
          }
          dgamma[cu] += sum_dy_xhat;
          dbeta[cu] += sum_dy;
          for (std::int64_t b = 0; b < B; ++b) {
            const std::int64_t base = (b * C + c) * HW;
            for (std::int64_t p = 0; p < HW; ++p) {
              const auto k = static_cast<std::size_t>(base + p);
              if (record.mode == Mode::kTrain) {
                const double xhat = (x[k] - mean) * inv;
                dx[k] += gamma[cu] * inv / count *
                         (count * dy[k] - sum_dy - xhat * sum_dy_xhat);
              } else {
                dx[k] += gamma[cu] * inv * dy[k];
              }
            }
          }
        }
        break;
      }
      case LayerKind::kRelu: {
        auto& dx = accumulate(preds.front());
        for (std::size_t k = 0; k < dy.size(); ++k) {
          if (x[k] > 0.0) dx[k] += dy[k];
        }
        break;
      }
      case LayerKind::kMaxPool2d: {
        auto& dx = accumulate(preds.front());
        const auto& argmax = record.pool_argmax.at(i);
        for (std::size_t k = 0; k < dy.size(); ++k) {
          if (argmax[k] >= 0) dx[static_cast<std::size_t>(argmax[k])] += dy[k];
        }
        break;
      }
      case LayerKind::kAvgPool2d: {
        auto& dx = accumulate(preds.front());
        const LayerAttrs& a = n.attrs;
        const double inv_area = 1.0 / static_cast<double>(a.kernel * a.kernel);
        for (std::int64_t bc = 0; bc < B * is.c; ++bc) {
          for (std::int64_t oy = 0; oy < os.h; ++oy) {
            for (std::int64_t ox = 0; ox < os.w; ++ox) {
              const double d = dy[static_cast<std::size_t>((bc * os.h + oy) * os.w + ox)] * inv_area;
              for (std::int64_t ky = 0; ky < a.kernel; ++ky) {
                const std::int64_t iy = oy * a.stride - a.padding + ky;
                if (iy < 0 || iy >= is.h) continue;
                for (std::int64_t kx = 0; kx < a.kernel; ++kx) {
                  const std::int64_t ix = ox * a.stride - a.padding + kx;
                  if (ix < 0 || ix >= is.w) continue;
                  dx[static_cast<std::size_t>(bc * is.h * is.w + iy * is.w + ix)] += d;
                }
              }
            }
          }
        }
        break;
      }
      case LayerKind::kGlobalAvgPool: {
        auto& dx = accumulate(preds.front());
        const std::int64_t HW = is.h * is.w;
        for (std::int64_t bc = 0; bc < B * is.c; ++bc) {
          const double d = dy[static_cast<std::size_t>(bc)] / static_cast<double>(HW);
          for (std::int64_t p = 0; p < HW; ++p) dx[static_cast<std::size_t>(bc * HW + p)] += d;
        }
        break;
      }
      case LayerKind::kAdd: {
        for (std::size_t slot = 0; slot < 2; ++slot) {
          auto& dx = accumulate(preds[slot]);
          for (std::size_t k = 0; k < dy.size(); ++k) dx[k] += dy[k];
        }
        break;
      }
      case LayerKind::kFlatten:
      case LayerKind::kSoftmaxCrossEntropy:
      case LayerKind::kOutput: {
        auto& dx = accumulate(preds.front());
        for (std::size_t k = 0; k < dy.size(); ++k) dx[k] += dy[k];
        break;
      }
      case LayerKind::kInput:
        break;
    }
  }
  return grads;
}

std::vector<ParamSet> Executor::per_sample_gradients(const Dataset& batch, Mode mode) const {
  std::vector<ParamSet> out;
  out.reserve(static_cast<std::size_t>(batch.size()));
  if (mode == Mode::kEval) {
    for (std::int64_t b = 0; b < batch.size(); ++b) {
      const ExecutionRecord rec = forward(batch.slice(b, b + 1), Mode::kEval);
      out.push_back(backward(rec));
    }
    return out;
  }
  const ExecutionRecord rec = forward(batch, mode);
  std::vector<double> w(static_cast<std::size_t>(batch.size()), 0.0);
  for (std::size_t b = 0; b < w.size(); ++b) {
    w[b] = 1.0;
    out.push_back(backward_weighted(rec, w));
    w[b] = 0.0;
  }
  return out;
}

std::vector<std::uint32_t> Executor::predictions(const ExecutionRecord& record,
                                                 std::size_t logits_node) {
  const Tensor64& z = record.activations.at(logits_node);
  const std::int64_t K = z.numel() / record.batch;
  std::vector<std::uint32_t> out(static_cast<std::size_t>(record.batch));
  for (std::int64_t b = 0; b < record.batch; ++b) {
    std::int64_t best = 0;
    for (std::int64_t k = 1; k < K; ++k) {
      if (z[static_cast<std::size_t>(b * K + k)] > z[static_cast<std::size_t>(b * K + best)]) best = k;
    }
    out[static_cast<std::size_t>(b)] = static_cast<std::uint32_t>(best);
  }
  return out;
}

}  // namespace structprune
