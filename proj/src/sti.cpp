#include "dimino/sti.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <nlohmann/json.hpp>
#include <sstream>

#include <fmt/format.h>

#include "dimino/metrics.hpp"

namespace dimino {

namespace {

double rel_l2(std::span<const double> a, std::span<const double> b) {
  double num = 0;
  double den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return den > 0 ? std::sqrt(num / den) : std::sqrt(num);
}

std::vector<double> flatten(const std::vector<Field>& fields) {
  std::vector<double> out;
  for (const auto& f : fields) out.insert(out.end(), f.values.begin(), f.values.end());
  return out;
}

template <class Real>
std::vector<double> to_doubles(const ad::Tensor<Real>& t) {
  return std::vector<double>(t.data().begin(), t.data().end());
}

// p^e for each target, concatenated over the grid.
std::vector<double> target_factors(const SystemInfo& info, double p, std::size_t n) {
  std::vector<double> out;
  for (const auto& name : info.targets) out.insert(out.end(), n, std::pow(p, info.rule.exponent_of(name)));
  return out;
}

struct ModelRun {
  std::vector<double> pre_scale;
  std::vector<double> output;
  std::vector<double> truth;  // solver at the original horizon
};

template <class Real>
ModelRun run_model(const Model& model, const Sample& sample) {
  ad::Tape<Real> tape;
  auto r = model.forward<Real>(tape, sample, false);
  return {to_doubles(r.pre_scale.value()), to_doubles(r.output.value()), {}};
}

ModelRun run_model(const Model& model, const Sample& sample, Precision precision) {
  return precision == Precision::kF32 ? run_model<float>(model, sample) : run_model<double>(model, sample);
}

bool is_integer(double p) { return p >= 1 && std::floor(p) == p; }

std::vector<double> rollout(const Model& model, const Sample& transformed, double p, Precision precision) {
  Sample state = transformed;
  state.horizon = transformed.horizon / p;
  std::vector<Field> pred;
  for (int r = 0; r < static_cast<int>(p); ++r) {
    pred = model.predict(state, precision);
    for (const auto& f : pred) {
      auto it = std::find_if(state.inputs.begin(), state.inputs.end(), [&](const Field& g) { return g.name == f.name; });
      if (it != state.inputs.end()) it->values = f.values;
    }
  }
  return flatten(pred);
}

struct SampleResult {
  double latent = 0;
  double output = 0;
  double model = 0;
  double base_single = 0;
  double base_roll = 0;
  double solver = 0;
};

}  // namespace

double solver_sti_oracle(const Sample& sample, double p, const SolverConfig& solver) {
  const auto& info = system_info(sample.system);
  if (!info.rule.exact) {
    fail(ErrorCode::kUnknownSystemRule, "no exact similar-transform rule for " + info.name);
  }
  const auto base = flatten(solve_sample(sample, solver));
  const auto scaled = flatten(solve_sample(similar_transform(sample, p), solver));
  const auto factors = target_factors(info, p, sample.grid.size());
  std::vector<double> expected(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) expected[i] = factors[i] * base[i];
  return rel_l2(scaled, expected);
}

StiReport sti_check(const Model& model, const std::vector<Sample>& samples, const StiOptions& options) {
  const auto& info = model.system();
  const auto& ps = options.p_list;
  if (ps.empty() || !std::is_sorted(ps.begin(), ps.end()) || std::find(ps.begin(), ps.end(), 1.0) == ps.end()) {
    fail(ErrorCode::kInvalidArgument, "p list must be sorted ascending and contain 1");
  }
  for (double p : ps) {
    if (!(p > 0) || !std::isfinite(p)) fail(ErrorCode::kInvalidArgument, "p values must be positive");
  }
  if (info.rule.exponents.empty()) fail(ErrorCode::kUnknownSystemRule, "no similar-transform rule for " + info.name);
  if (options.baseline && options.baseline->config().system != model.config().system) {
    fail(ErrorCode::kSpecMismatch, "baseline model is for a different system");
  }
  const std::size_t count =
      options.max_samples > 0 ? std::min(options.max_samples, samples.size()) : samples.size();
  for (std::size_t i = 0; i < count; ++i) {
    if (samples[i].system != model.config().system) {
      fail(ErrorCode::kSpecMismatch, "sample " + std::to_string(i) + " is " +
                                         std::string(system_name(samples[i].system)) + ", model is " + info.name);
    }
  }

  StiReport report;
  report.system = info.name;
  report.model = std::string(variant_name(model.config().variant));
  if (options.baseline) report.baseline = std::string(variant_name(options.baseline->config().variant));
  report.samples = count;

  std::vector<ModelRun> reference(count);
  std::vector<std::exception_ptr> errors(count);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(count); ++i) {
    try {
      const Sample& s = samples[static_cast<std::size_t>(i)];
      auto& ref = reference[static_cast<std::size_t>(i)];
      ref = run_model(model, s, options.precision);
      if (info.rule.exact) ref.truth = flatten(solve_sample(s, options.solver));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  for (double p : ps) {
    std::vector<SampleResult> results(count);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(count); ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      try {
        const Sample& s = samples[i];
        const Sample tp = similar_transform(s, p);
        const auto truth = flatten(solve_sample(tp, options.solver));
        const auto run = run_model(model, tp, options.precision);
        auto& r = results[i];
        r.latent = rel_l2(run.pre_scale, reference[i].pre_scale);
        if (info.rule.exact) {
          const auto factors = target_factors(info, p, s.grid.size());
          std::vector<double> expected(run.output.size());
          for (std::size_t k = 0; k < expected.size(); ++k) expected[k] = factors[k] * reference[i].output[k];
          r.output = rel_l2(run.output, expected);
          const auto& base_truth = reference[i].truth;
          std::vector<double> scaled(base_truth.size());
          for (std::size_t k = 0; k < scaled.size(); ++k) scaled[k] = factors[k] * base_truth[k];
          r.solver = rel_l2(truth, scaled);
        }
        r.model = rel_l2(run.output, truth);
        if (options.baseline) {
          r.base_single = rel_l2(flatten(options.baseline->predict(tp, options.precision)), truth);
          if (is_integer(p)) r.base_roll = rel_l2(rollout(*options.baseline, tp, p, options.precision), truth);
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }

    StiEntry entry;
    entry.p = p;
    double out_worst = 0;
    double solver_worst = 0;
    double single = 0;
    double roll = 0;
    for (const auto& r : results) {
      entry.latent_residual = std::max(entry.latent_residual, r.latent);
      out_worst = std::max(out_worst, r.output);
      solver_worst = std::max(solver_worst, r.solver);
      entry.model_rel_l2 += r.model;
      single += r.base_single;
      roll += r.base_roll;
    }
    const double inv = count > 0 ? 1.0 / static_cast<double>(count) : 0.0;
    entry.model_rel_l2 *= inv;
    if (info.rule.exact) {
      entry.output_residual = out_worst;
      entry.solver_residual = solver_worst;
    }
    if (options.baseline) {
      entry.baseline_single_shot = single * inv;
      if (is_integer(p)) entry.baseline_rollout = roll * inv;
    }
    report.entries.push_back(entry);
  }
  return report;
}

std::string sti_report_json(const StiReport& report) {
  nlohmann::json j;
  j["system"] = report.system;
  j["model"] = report.model;
  if (!report.baseline.empty()) j["baseline"] = report.baseline;
  j["samples"] = report.samples;
  j["residual_norm"] = "rel-l2";
  j["entries"] = nlohmann::json::array();
  for (const auto& e : report.entries) {
    nlohmann::json row{{"p", e.p}, {"latent_residual", e.latent_residual}, {"model_rel_l2", e.model_rel_l2}};
    if (e.output_residual) row["output_scaling_residual"] = *e.output_residual;
    if (e.solver_residual) row["solver_residual"] = *e.solver_residual;
    if (e.baseline_single_shot) row["baseline_single_shot_rel_l2"] = *e.baseline_single_shot;
    if (e.baseline_rollout) row["baseline_rollout_rel_l2"] = *e.baseline_rollout;
    j["entries"].push_back(row);
  }
  return j.dump(2);
}

std::string format_sti_table(const StiReport& report) {
  std::ostringstream out;
  out << fmt::format("similar-transform check: {} on {} samples\n", report.system, report.samples);
  out << fmt::format("{:<28}", "rel-L2 (1e-2)");
  for (const auto& e : report.entries) out << fmt::format(" {:>12}", fmt::format("p={:g}", e.p));
  out << "\n";
  auto row = [&](std::string label, auto&& get, bool percent) {
    out << fmt::format("{:<28}", label);
    for (const auto& e : report.entries) {
      const std::optional<double> v = get(e);
      if (!v) {
        out << fmt::format(" {:>12}", "-");
      } else if (percent) {
        out << fmt::format(" {:>12.3f}", 100 * *v);
      } else {
        out << fmt::format(" {:>12.3e}", *v);
      }
    }
    out << "\n";
  };
  row(report.model, [](const StiEntry& e) { return std::optional<double>(e.model_rel_l2); }, true);
  if (!report.baseline.empty()) {
    row(report.baseline + " (single shot)", [](const StiEntry& e) { return e.baseline_single_shot; }, true);
    row(report.baseline + " (rollout)", [](const StiEntry& e) { return e.baseline_rollout; }, true);
  }
  out << "residuals\n";
  row("latent", [](const StiEntry& e) { return std::optional<double>(e.latent_residual); }, false);
  row("output scaling", [](const StiEntry& e) { return e.output_residual; }, false);
  row("solver", [](const StiEntry& e) { return e.solver_residual; }, false);
  return out.str();
}

}  // namespace dimino
