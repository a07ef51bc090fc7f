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

#include "structprune/bench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "structprune/model_io.hpp"

namespace structprune {
namespace fs = std::filesystem;
namespace {

double round2(double x) { return std::round(x * 100.0) / 100.0; }

std::string speedup_label(double s) { return fmt::format("{:g}x", s); }

std::string method_label(const LeaderboardRow& r) {
  std::string s = criterion_display_name(r.importance);
  if (r.regularizer) s += " + " + regularizer_display_name(*r.regularizer);
  return s;
}

std::string cell_name(double speedup, const std::string& criterion,
                      const std::optional<std::string>& reg) {
  std::string s = fmt::format("{:g}x_{}", speedup, criterion);
  if (reg) s += "+" + *reg;
  return s;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json parse_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed JSON in '" + path.string() + "': " + e.what());
  }
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

struct Accumulator {
  double pruned = 0, params = 0, params_pct = 0, flops_pct = 0, step = 0, reg = 0;
  int n = 0;
};

}  // namespace

void ExperimentConfig::validate() const {
  if (repeats < 1) throw ConfigError("repeats must be >= 1");
  if (speedups.empty()) throw ConfigError("at least one speedup is required");
  for (double s : speedups) {
    if (!(s >= 1.0)) throw ConfigError("speedups must be >= 1");
  }
  if (criteria.empty() && regularizers.empty()) {
    throw ConfigError("experiment lists no criteria and no regularizers");
  }
  for (const auto& c : criteria) CriterionSpec::named(c);
  for (const auto& r : regularizers) {
    r.reg.validate();
    CriterionSpec::named(r.criterion);
  }
  finetune.validate();
  sparse.validate();
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json regs = nlohmann::json::array();
  for (const auto& r : regularizers) {
    nlohmann::json j = r.reg.to_json();
    j["criterion"] = r.criterion;
    regs.push_back(j);
  }
  return {{"model", model.string()},
          {"train", train.string()},
          {"val", val.string()},
          {"calibration", calibration.string()},
          {"criteria", criteria},
          {"regularizers", regs},
          {"speedups", speedups},
          {"repeats", repeats},
          {"seed", seed},
          {"prune", prune.to_json()},
          {"finetune", finetune.to_json()},
          {"sparse", sparse.to_json()},
          {"output", output.string()}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j, const fs::path& base_dir) {
  ExperimentConfig c;
  try {
    c.model = resolve(base_dir, j.at("model").get<std::string>());
    c.train = resolve(base_dir, j.at("train").get<std::string>());
    c.val = resolve(base_dir, j.at("val").get<std::string>());
    c.calibration = resolve(base_dir, j.value("calibration", std::string()));
    c.criteria = j.value("criteria", std::vector<std::string>{});
    for (const auto& r : j.value("regularizers", nlohmann::json::array())) {
      c.regularizers.push_back({RegConfig::from_json(r), r.value("criterion", "magnitude_l2")});
    }
    c.speedups = j.value("speedups", c.speedups);
    c.repeats = j.value("repeats", c.repeats);
    c.seed = j.value("seed", c.seed);
    if (j.contains("prune")) c.prune = PruneConfig::from_json(j.at("prune"));
    if (j.contains("finetune")) c.finetune = TrainConfig::from_json(j.at("finetune"));
    if (j.contains("sparse")) c.sparse = TrainConfig::from_json(j.at("sparse"));
    c.output = resolve(base_dir, j.value("output", std::string()));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& file) {
  return from_json(parse_json(file), file.parent_path());
}

std::string ExperimentConfig::hash() const {
  const std::string text = to_json().dump();
  return fmt::format("{:08x}", crc32_of(std::span<const std::uint8_t>(
                                   reinterpret_cast<const std::uint8_t*>(text.data()), text.size())));
}

nlohmann::json LeaderboardRow::to_json() const {
  nlohmann::json j = {{"speedup", speedup},       {"importance", importance},
                      {"stochastic", stochastic}, {"rank", rank},
                      {"base", base},             {"pruned", pruned},
                      {"delta", delta},           {"params", params},
                      {"params_pct", params_pct}, {"flops_pct", flops_pct},
                      {"step_time", step_time},   {"seeds", seeds},
                      {"failed", failed},         {"error", error}};
  j["regularizer"] = regularizer ? nlohmann::json(*regularizer) : nlohmann::json(nullptr);
  j["reg_time"] = reg_time ? nlohmann::json(*reg_time) : nlohmann::json(nullptr);
  return j;
}

LeaderboardRow LeaderboardRow::from_json(const nlohmann::json& j) {
  LeaderboardRow r;
  r.speedup = j.at("speedup").get<double>();
  r.importance = j.at("importance").get<std::string>();
  if (!j.at("regularizer").is_null()) r.regularizer = j.at("regularizer").get<std::string>();
  r.stochastic = j.at("stochastic").get<bool>();
  r.rank = j.at("rank").get<int>();
  r.base = j.at("base").get<double>();
  r.pruned = j.at("pruned").get<double>();
  r.delta = j.at("delta").get<double>();
  r.params = j.at("params").get<double>();
  r.params_pct = j.at("params_pct").get<double>();
  r.flops_pct = j.at("flops_pct").get<double>();
  r.step_time = j.at("step_time").get<double>();
  if (!j.at("reg_time").is_null()) r.reg_time = j.at("reg_time").get<double>();
  r.seeds = j.at("seeds").get<int>();
  r.failed = j.at("failed").get<bool>();
  r.error = j.at("error").get<std::string>();
  return r;
}

bool LeaderboardRow::same_result(const LeaderboardRow& o) const {
  return speedup == o.speedup && importance == o.importance && regularizer == o.regularizer &&
         stochastic == o.stochastic && rank == o.rank && base == o.base && pruned == o.pruned &&
         delta == o.delta && params == o.params && params_pct == o.params_pct &&
         flops_pct == o.flops_pct && reg_time.has_value() == o.reg_time.has_value() &&
         seeds == o.seeds && failed == o.failed && error == o.error;
}

ExperimentInputs ExperimentInputs::load(const ExperimentConfig& cfg) {
  Dataset train = load_dataset(cfg.train);
  Dataset val = load_dataset(cfg.val);
  Dataset calib = cfg.calibration.empty() ? train : load_dataset(cfg.calibration);
  return {load_model(cfg.model), std::move(train), std::move(val), std::move(calib)};
}

bool ExperimentResult::any_failed() const {
  return std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.failed; });
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  return run_experiment(cfg, ExperimentInputs::load(cfg));
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const ExperimentInputs& in) {
  cfg.validate();
  const CostReport base_cost = model_cost(in.model);
  const double base_acc = 100.0 * evaluate(in.model, in.val);
  const std::string config_hash = cfg.hash();
  const std::string base_checksum = model_checksum(in.model);

  struct Method {
    std::string criterion;
    std::optional<std::size_t> reg;
  };
  std::vector<Method> methods;
  for (const auto& c : cfg.criteria) methods.push_back({c, std::nullopt});
  for (std::size_t i = 0; i < cfg.regularizers.size(); ++i) {
    methods.push_back({cfg.regularizers[i].criterion, i});
  }

  // Sparsified models do not depend on the speedup.
  std::map<std::pair<std::size_t, std::uint64_t>, SparsifyResult> sparse_cache;

  std::vector<LeaderboardRow> rows;
  for (double speedup : cfg.speedups) {
    for (const Method& m : methods) {
      LeaderboardRow row;
      row.speedup = speedup;
      row.importance = m.criterion;
      if (m.reg) row.regularizer = cfg.regularizers[*m.reg].reg.name;
      row.stochastic = CriterionSpec::named(m.criterion).stochastic();
      row.base = base_acc;
      const int nseeds = row.stochastic ? cfg.repeats : 1;
      const std::string cell = cell_name(speedup, m.criterion, row.regularizer);
      Accumulator acc;
      try {
        for (int k = 0; k < nseeds; ++k) {
          const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(k);
          ModelGraph start = in.model;
          std::optional<double> reg_time;
          if (m.reg) {
            const auto key = std::make_pair(*m.reg, seed);
            auto it = sparse_cache.find(key);
            if (it == sparse_cache.end()) {
              TrainConfig tc = cfg.sparse;
              tc.seed = seed;
              it = sparse_cache
                       .emplace(key, sparsify(in.model, in.train, cfg.regularizers[*m.reg].reg, tc))
                       .first;
            }
            start = it->second.model;
            reg_time = it->second.reg_time;
          }
          PruneConfig pc = cfg.prune;
          pc.speedup = speedup;
          pc.criterion.name = m.criterion;
          pc.seed = seed;
          PruneResult pr = prune_to_target(start, pc, &in.calibration);
          ModelGraph final_model = pr.model;
          if (cfg.finetune.epochs > 0) {
            TrainConfig tc = cfg.finetune;
            tc.seed = seed;
            final_model = train(final_model, in.train, tc).model;
          }
          const double pruned_acc = 100.0 * evaluate(final_model, in.val);
          const CostReport fc = model_cost(final_model).compare_to(base_cost);

          acc.pruned += pruned_acc;
          acc.params += static_cast<double>(fc.total_params);
          acc.params_pct += 100.0 * fc.params_ratio.value_or(1.0);
          acc.flops_pct += 100.0 * fc.flops_ratio.value_or(1.0);
          acc.step += pr.step_time();
          acc.reg += reg_time.value_or(0.0);
          ++acc.n;

          if (!cfg.output.empty()) {
            const fs::path dir = cfg.output / "runs" / cell / fmt::format("seed{}", k);
            save_model(final_model, dir / "model");
            write_text(dir / "telemetry.json", pr.telemetry_json().dump(2));
            nlohmann::json run = {{"cell", cell},
                                  {"seed", seed},
                                  {"config_hash", config_hash},
                                  {"base_model_checksum", base_checksum},
                                  {"pruned_model_checksum", model_checksum(pr.model)},
                                  {"final_model_checksum", model_checksum(final_model)},
                                  {"base_accuracy", base_acc},
                                  {"pruned_accuracy", pruned_acc},
                                  {"params", fc.total_params},
                                  {"flops", fc.total_flops},
                                  {"step_time", pr.step_time()},
                                  {"prune", pc.to_json()},
                                  {"finetune", cfg.finetune.to_json()}};
            if (m.reg) {
              run["regularizer"] = cfg.regularizers[*m.reg].reg.to_json();
              run["reg_time"] = *reg_time;
            }
            write_text(dir / "run.json", run.dump(2));
          }
        }
        const double n = static_cast<double>(acc.n);
        row.seeds = acc.n;
        row.pruned = acc.pruned / n;
        row.params = acc.params / n;
        row.params_pct = acc.params_pct / n;
        row.flops_pct = acc.flops_pct / n;
        row.step_time = acc.step / n;
        if (m.reg) row.reg_time = acc.reg / n;
        row.delta = round2(round2(row.pruned) - round2(row.base));
      } catch (const std::exception& e) {
        row.failed = true;
        row.error = e.what();
        spdlog::error("cell {} failed: {}", cell, e.what());
      }
      rows.push_back(std::move(row));
    }
  }

  ExperimentResult result{rank_rows(std::move(rows))};
  if (!cfg.output.empty()) {
    save_rows(result.rows, cfg.output);
    write_text(cfg.output / "leaderboard.md", emit_leaderboard(result.rows, ReportFormat::kMarkdown));
    write_text(cfg.output / "leaderboard.csv", emit_leaderboard(result.rows, ReportFormat::kCsv));
    write_text(cfg.output / "leaderboard.json", emit_leaderboard(result.rows, ReportFormat::kJson));
    write_text(cfg.output / "config.json", cfg.to_json().dump(2));
  }
  return result;
}

std::vector<LeaderboardRow> rank_rows(std::vector<LeaderboardRow> rows) {
  // Display order: speedup, criterion section before regularizer section,
  // ranked rows, then failures.
  std::stable_sort(rows.begin(), rows.end(), [](const LeaderboardRow& a, const LeaderboardRow& b) {
    if (a.speedup != b.speedup) return a.speedup < b.speedup;
    if (a.regularizer.has_value() != b.regularizer.has_value()) return !a.regularizer.has_value();
    if (a.failed != b.failed) return !a.failed;
    if (a.delta != b.delta) return a.delta > b.delta;
    if (a.params != b.params) return a.params < b.params;
    return method_label(a) < method_label(b);
  });
  int rank = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const bool new_section = i == 0 || rows[i].speedup != rows[i - 1].speedup ||
                             rows[i].regularizer.has_value() != rows[i - 1].regularizer.has_value();
    if (new_section) rank = 0;
    rows[i].rank = rows[i].failed ? 0 : ++rank;
  }
  return rows;
}

ReportFormat parse_report_format(std::string_view name) {
  if (name == "md" || name == "markdown") return ReportFormat::kMarkdown;
  if (name == "csv") return ReportFormat::kCsv;
  if (name == "json") return ReportFormat::kJson;
  throw ConfigError("unknown report format '" + std::string(name) + "'");
}

const std::vector<std::string>& leaderboard_columns() {
  static const std::vector<std::string> cols = {
      "Speed Up", "Importance", "Regularizer", "Rank",      "Base",
      "Pruned",   "ΔAcc",       "Parameters",  "Step Time", "Reg Time"};
  return cols;
}

std::string format_seconds(double seconds) {
  if (seconds < 60.0) return fmt::format("{:.3f}s", seconds);
  auto total = static_cast<std::int64_t>(std::llround(seconds));
  return fmt::format("{}m{}s", total / 60, total % 60);
}

std::string format_params(double params, double pct) {
  std::string count;
  if (params >= 1e6) {
    count = fmt::format("{:.2f} M", params / 1e6);
  } else if (params >= 1e3) {
    count = fmt::format("{:.2f} K", params / 1e3);
  } else {
    count = fmt::format("{:.0f}", params);
  }
  return fmt::format("{} ({:.2f}%)", count, pct);
}

std::vector<std::string> row_cells(const LeaderboardRow& r) {
  const std::string name = criterion_display_name(r.importance) + (r.stochastic ? "*" : "");
  const std::string reg = r.regularizer ? regularizer_display_name(*r.regularizer) : "N/A";
  if (r.failed) {
    return {speedup_label(r.speedup), name, reg, "N/A", fmt::format("{:.2f}", r.base),
            "failed", "N/A", "N/A", "N/A", "N/A"};
  }
  return {speedup_label(r.speedup),
          name,
          reg,
          std::to_string(r.rank),
          fmt::format("{:.2f}", r.base),
          fmt::format("{:.2f}", r.pruned),
          fmt::format("{:+.2f}", r.delta),
          format_params(r.params, r.params_pct),
          format_seconds(r.step_time),
          r.reg_time ? format_seconds(*r.reg_time) : "N/A"};
}

std::string emit_leaderboard(const std::vector<LeaderboardRow>& rows, ReportFormat format) {
  const auto& cols = leaderboard_columns();
  std::vector<double> speedups;
  for (const auto& r : rows) {
    if (std::find(speedups.begin(), speedups.end(), r.speedup) == speedups.end()) {
      speedups.push_back(r.speedup);
    }
  }
  auto section = [&](double s, bool reg) {
    std::vector<const LeaderboardRow*> out;
    for (const auto& r : rows) {
      if (r.speedup == s && r.regularizer.has_value() == reg) out.push_back(&r);
    }
    return out;
  };

  if (format == ReportFormat::kCsv) {
    std::string out;
    for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + csv_escape(cols[i]);
    out += "\n";
    for (double s : speedups) {
      for (bool reg : {false, true}) {
        for (const auto* r : section(s, reg)) {
          const auto cells = row_cells(*r);
          for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + csv_escape(cells[i]);
          out += "\n";
        }
      }
    }
    return out;
  }

  if (format == ReportFormat::kJson) {
    nlohmann::json sections = nlohmann::json::array();
    for (double s : speedups) {
      nlohmann::json sec = {{"speedup", speedup_label(s)}};
      for (bool reg : {false, true}) {
        const auto part = section(s, reg);
        if (part.empty()) continue;
        nlohmann::json list = nlohmann::json::array();
        for (const auto* r : part) {
          const auto cells = row_cells(*r);
          nlohmann::json obj = nlohmann::json::object();
          for (std::size_t i = 0; i < cols.size(); ++i) obj[cols[i]] = cells[i];
          list.push_back(obj);
        }
        sec[reg ? "regularizers" : "criteria"] = list;
      }
      sections.push_back(sec);
    }
    return nlohmann::json{{"columns", cols}, {"sections", sections}}.dump(2) + "\n";
  }

  std::string out = "# Leaderboard\n";
  auto line = [](const std::vector<std::string>& cells) {
    std::string s = "|";
    for (const auto& c : cells) s += " " + c + " |";
    return s + "\n";
  };
  for (double s : speedups) {
    out += "\n## " + speedup_label(s) + "\n\n" + line(cols);
    std::string sep = "|";
    for (std::size_t i = 0; i < cols.size(); ++i) sep += i < 3 ? " --- |" : " ---: |";
    out += sep + "\n";
    for (bool reg : {false, true}) {
      for (const auto* r : section(s, reg)) out += line(row_cells(*r));
    }
  }
  out += "\n`*` marks random or data-driven criteria (mean over seeds).\n";
  return out;
}

std::vector<LeaderboardRow> load_rows(const fs::path& dir) {
  const nlohmann::json j = parse_json(dir / "rows.json");
  std::vector<LeaderboardRow> rows;
  try {
    for (const auto& r : j.at("rows")) rows.push_back(LeaderboardRow::from_json(r));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed rows.json: " + std::string(e.what()));
  }
  return rows;
}

void save_rows(const std::vector<LeaderboardRow>& rows, const fs::path& dir) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& r : rows) list.push_back(r.to_json());
  write_text(dir / "rows.json", nlohmann::json{{"rows", list}}.dump(2) + "\n");
}

}  // namespace structprune
