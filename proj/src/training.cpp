#include "dimino/training.hpp"

#include <cmath>
#include <exception>
#include <limits>
#include <nlohmann/json.hpp>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "dimino/hash.hpp"

namespace dimino {

namespace {

// Runs body(i) for i in [0, n) on the OpenMP team and rethrows the first
// failure by index once the loop is done.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

template <class Real>
SampleGradient sample_gradient_impl(const Model& model, const Sample& sample, MetricKind loss) {
  ad::Tape<Real> tape;
  auto r = model.forward<Real>(tape, sample, true);
  const auto target = pack_fields(sample, model.system().targets, true);
  auto l = rel_loss<Real>(loss, r.output, target, sample.grid);
  SampleGradient out;
  out.loss = static_cast<double>(l.value().item());
  tape.backward(l);
  const auto& params = model.parameters();
  out.grads.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].trainable) continue;
    const auto g = tape.grad(r.params[i]);
    out.grads[i].assign(g.data().begin(), g.data().end());
  }
  return out;
}

std::vector<Sample> select(const std::vector<Sample>& samples, const std::vector<std::size_t>& idx) {
  std::vector<Sample> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(samples[i]);
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) fail(ErrorCode::kInvalidArgument, "epochs must be at least 1");
  if (batch_size < 1) fail(ErrorCode::kInvalidArgument, "batch size must be at least 1");
  if (!(lr >= 0) || !std::isfinite(lr)) fail(ErrorCode::kInvalidArgument, "learning rate must be finite and >= 0");
  if (!(valid_fraction >= 0 && valid_fraction < 1)) {
    fail(ErrorCode::kInvalidArgument, "valid fraction must lie in [0, 1)");
  }
  if (loss == MetricKind::kRelL1) fail(ErrorCode::kInvalidArgument, "rel-l1 is an evaluation metric only");
}

double scheduled_lr(const TrainConfig& cfg, std::size_t epoch) {
  if (epoch < cfg.warmup_epochs) {
    return cfg.lr * static_cast<double>(epoch + 1) / static_cast<double>(cfg.warmup_epochs);
  }
  const std::size_t span = cfg.epochs > cfg.warmup_epochs ? cfg.epochs - cfg.warmup_epochs : 1;
  const double t = static_cast<double>(epoch - cfg.warmup_epochs) / static_cast<double>(span);
  return cfg.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

void adam_step(std::span<Parameter> params, const std::vector<std::vector<double>>& grads, AdamState& state,
               double lr, const AdamOptions& options) {
  if (grads.size() != params.size()) {
    fail(ErrorCode::kShapeMismatch, "adam: " + std::to_string(grads.size()) + " gradients for " +
                                        std::to_string(params.size()) + " parameters");
  }
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (!params[i].trainable) continue;
      state.m[i].assign(params[i].value.data().size(), 0.0);
      state.v[i].assign(params[i].value.data().size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) fail(ErrorCode::kShapeMismatch, "adam state does not match the parameters");
  ++state.step;
  const double c1 = 1.0 - std::pow(options.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(options.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].trainable) continue;
    auto w = params[i].value.data();
    const auto& g = grads[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (g.size() != w.size() || m.size() != w.size()) {
      fail(ErrorCode::kShapeMismatch, "adam: gradient size mismatch for '" + params[i].name + "'");
    }
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = options.beta1 * m[k] + (1.0 - options.beta1) * g[k];
      v[k] = options.beta2 * v[k] + (1.0 - options.beta2) * g[k] * g[k];
      w[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + options.eps);
    }
  }
}

std::string epoch_record_json(const EpochRecord& r) {
  nlohmann::json j;
  j["epoch"] = r.epoch;
  j["lr"] = r.lr;
  j["train_loss"] = r.train_loss;
  j["valid_rel_l2"] = r.valid_rel_l2;
  j["valid_rel_h1"] = r.valid_rel_h1;
  j["valid_rel_l1"] = r.valid_rel_l1;
  return j.dump();
}

SplitIndices carve_validation(std::size_t count, double valid_fraction, std::uint64_t seed) {
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(splitmix64(seed ^ fnv1a("valid")));
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t n_valid = static_cast<std::size_t>(std::floor(valid_fraction * static_cast<double>(count)));
  if (valid_fraction > 0 && n_valid == 0 && count >= 2) n_valid = 1;
  SplitIndices out;
  out.valid.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_valid));
  out.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_valid), order.end());
  std::sort(out.valid.begin(), out.valid.end());
  std::sort(out.train.begin(), out.train.end());
  return out;
}

SampleGradient sample_gradient(const Model& model, const Sample& sample, MetricKind loss, Precision precision) {
  return precision == Precision::kF32 ? sample_gradient_impl<float>(model, sample, loss)
                                      : sample_gradient_impl<double>(model, sample, loss);
}

TrainResult train(Model model, const std::vector<Sample>& samples, const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg.validate();
  if (samples.empty()) fail(ErrorCode::kInvalidArgument, "cannot train on an empty split");
  const auto split = carve_validation(samples.size(), cfg.valid_fraction, cfg.seed);
  const auto train_set = select(samples, split.train);
  const auto valid_set = split.valid.empty() ? train_set : select(samples, split.valid);
  model.fit_statistics(train_set);

  TrainResult result{model, 0, {}};
  double best_l2 = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  AdamState state;
  const std::size_t n = train_set.size();
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = scheduled_lr(cfg, epoch);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(splitmix64(cfg.seed ^ splitmix64(epoch + 1)));
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<double> losses(n, 0.0);
    for (std::size_t start = 0; start < n; start += cfg.batch_size, ++step) {
      const std::size_t b = std::min(cfg.batch_size, n - start);
      std::vector<SampleGradient> parts(b);
      parallel_for(b, [&](std::size_t j) {
        parts[j] = sample_gradient(model, train_set[order[start + j]], cfg.loss, cfg.precision);
      });
      std::vector<std::vector<double>> grads(model.parameters().size());
      for (std::size_t j = 0; j < b; ++j) {
        if (!std::isfinite(parts[j].loss)) {
          fail(ErrorCode::kNaNLoss, "non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                        std::to_string(step) + " (sample " +
                                        std::to_string(split.train[order[start + j]]) + ")");
        }
        losses[order[start + j]] = parts[j].loss;
        for (std::size_t i = 0; i < grads.size(); ++i) {
          const auto& g = parts[j].grads[i];
          if (g.empty()) continue;
          if (grads[i].empty()) grads[i].assign(g.size(), 0.0);
          for (std::size_t k = 0; k < g.size(); ++k) grads[i][k] += g[k];
        }
      }
      const double inv_b = 1.0 / static_cast<double>(b);
      for (auto& g : grads) {
        for (auto& v : g) v *= inv_b;
      }
      adam_step(model.parameters(), grads, state, lr);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(n);
    const auto valid = evaluate(model, valid_set, cfg.precision);
    rec.valid_rel_l2 = valid.rel_l2;
    rec.valid_rel_h1 = valid.rel_h1;
    rec.valid_rel_l1 = valid.rel_l1;
    if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.valid_rel_l2)) {
      fail(ErrorCode::kNaNLoss, "non-finite validation metric at epoch " + std::to_string(epoch));
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (rec.valid_rel_l2 < best_l2) {
      best_l2 = rec.valid_rel_l2;
      result.best = model;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

MetricTable evaluate(const Model& model, const std::vector<Sample>& samples, Precision precision) {
  MetricTable table;
  table.model = std::string(variant_name(model.config().variant));
  table.count = samples.size();
  if (samples.empty()) return table;
  std::vector<std::array<double, 3>> scores(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    const auto& s = samples[i];
    const auto pred = model.predict(s, precision);
    scores[i] = {rel_metric(MetricKind::kRelL2, pred, s.targets, s.grid),
                 rel_metric(MetricKind::kRelH1, pred, s.targets, s.grid),
                 rel_metric(MetricKind::kRelL1, pred, s.targets, s.grid)};
  });
  for (const auto& s : scores) {
    table.rel_l2 += s[0];
    table.rel_h1 += s[1];
    table.rel_l1 += s[2];
  }
  const double inv = 1.0 / static_cast<double>(samples.size());
  table.rel_l2 *= inv;
  table.rel_h1 *= inv;
  table.rel_l1 *= inv;
  return table;
}

MetricTable evaluate(const Model& model, const Dataset& dataset, std::string_view split, Precision precision) {
  return evaluate(model, dataset.split(split), precision);
}

double gain(double base, double score) {
  if (base == 0) fail(ErrorCode::kDivisionByZero, "gain against a zero baseline");
  return (base - score) / base;
}

std::string format_metric_tables(const std::vector<MetricTable>& rows, const MetricTable* baseline) {
  std::ostringstream out;
  out << fmt::format("{:<12} {:>6} {:>14} {:>14} {:>14}", "model", "n", "rel-L2 (1e-2)", "rel-H1 (1e-2)",
                     "rel-L1 (1e-2)");
  if (baseline) out << fmt::format(" {:>8}", "gain");
  out << "\n";
  for (const auto& r : rows) {
    out << fmt::format("{:<12} {:>6} {:>14.3f} {:>14.3f} {:>14.3f}", r.model, r.count, 100 * r.rel_l2, 100 * r.rel_h1,
                       100 * r.rel_l1);
    if (baseline) {
      if (&r == baseline || r.model == baseline->model) {
        out << fmt::format(" {:>8}", "-");
      } else {
        out << fmt::format(" {:>7.1f}%", 100 * gain(baseline->rel_l2, r.rel_l2));
      }
    }
    out << "\n";
  }
  return out.str();
}

std::string metric_tables_json(const std::vector<MetricTable>& rows, const MetricTable* baseline) {
  nlohmann::json j;
  j["units"] = "raw fractions; tables print them times 100";
  j["rel_h1_definition"] = "sqrt(|e|^2 + |grad e|^2) / sqrt(|t|^2 + |grad t|^2), spectral gradient";
  j["note"] = "learning rate, batch size and width are engineering defaults, not tuned values";
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json row{{"model", r.model}, {"count", r.count}, {"rel_l2", r.rel_l2}, {"rel_h1", r.rel_h1},
                       {"rel_l1", r.rel_l1}};
    if (baseline && r.model != baseline->model) row["gain_rel_l2"] = gain(baseline->rel_l2, r.rel_l2);
    j["rows"].push_back(row);
  }
  return j.dump(2);
}

}  // namespace dimino
