#include "bxent/pipeline.hpp"

#include <atomic>
#include <fstream>
#include <ostream>
#include <thread>
#include <unordered_map>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "bxent/error.hpp"
#include "bxent/ingest.hpp"
#include "bxent/report.hpp"
#include "bxent/store.hpp"
#include "bxent/text.hpp"

namespace bxent {

namespace {

namespace fs = std::filesystem;

template <class F>
void as_stage(std::string_view name, F&& body) {
  try {
    body();
  } catch (const ConfigError&) {
    throw;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(std::string(name), e.what());
  }
}

std::ofstream open_output(const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write", path.string());
  return out;
}

void require(const fs::path& path, std::string_view produced_by) {
  if (!fs::exists(path)) {
    throw InputError(fmt::format("missing input; run the {} stage first", produced_by), path.string());
  }
}

struct ResponseRecord {
  std::string case_id;
  std::string model;
  RankedResponse response;
  std::string error;
};

void write_responses(std::ostream& out, const std::vector<ResponseRecord>& records) {
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["case_id"] = r.case_id;
    j["model"] = r.model;
    j["status"] = to_string(r.response.status);
    j["ranked"] = r.response.ranked;
    if (!r.error.empty()) j["error"] = r.error;
    out << j.dump() << '\n';
  }
}

std::vector<ResponseRecord> read_responses(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("missing or unreadable responses", path.string());
  std::vector<ResponseRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (read_line(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ResponseRecord r;
      r.case_id = j.at("case_id").get<std::string>();
      r.model = j.at("model").get<std::string>();
      r.response.case_id = r.case_id;
      r.response.status = parse_status_from_string(j.at("status").get<std::string>());
      r.response.ranked = j.at("ranked").get<std::vector<std::string>>();
      r.error = j.value("error", "");
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw InputError(e.what(), path.string(), line_no);
    }
  }
  return out;
}

}  // namespace

ProxySchema schema_for(const RunConfig& config, const Dataset& dataset) {
  ProxySchema schema;
  if (config.settings) {
    schema.settings = *config.settings;
  } else {
    schema = ProxySchema::for_domain(dataset.domain(), dataset);
  }
  schema.validate(dataset);
  return schema;
}

void record_config(const RunConfig& config) {
  fs::create_directories(config.output_dir);
  write_effective_config(config, Artifacts(config.output_dir).effective_config());
}

void stage_ingest(const RunConfig& config, std::ostream& log) {
  as_stage("ingest", [&] {
    const Artifacts a(config.output_dir);
    Dataset raw;
    PreprocessRules rules;
    SkipReport skipped;
    switch (config.dataset.kind) {
      case SourceKind::movielens:
        raw = parse_movielens(config.dataset.path);
        rules = PreprocessRules::movies();
        break;
      case SourceKind::lastfm:
        raw = parse_lastfm(config.dataset.path, &skipped);
        rules = PreprocessRules::music();
        break;
      case SourceKind::store:
        raw = load_store(config.dataset.path);
        break;
      case SourceKind::synth:
        throw ConfigError("the dataset source is synthetic; use the synth stage");
    }
    if (config.dataset.preprocess == "none") rules = PreprocessRules::none();
    Dataset ds = rules.empty() ? std::move(raw) : preprocess(raw, rules);
    save_store(ds, a.dataset());
    auto out = open_output(a.ingest_skips());
    skipped.write(out);
    log << fmt::format("ingest: {} users, {} items, {} interactions ({} rows skipped)\n", ds.user_count(),
                       ds.item_count(), ds.interactions().size(), skipped.size());
  });
}

void stage_synth(const RunConfig& config, std::ostream& log) {
  as_stage("synth", [&] {
    if (config.dataset.kind != SourceKind::synth) throw ConfigError("the dataset source is not synthetic; use ingest");
    const Artifacts a(config.output_dir);
    const auto result = generate(config.synth);
    save_store(result.dataset, a.dataset());
    result.truth.save(a.ground_truth());
    log << fmt::format("synth: {} case, {} users, {} items, {} interactions\n", to_string(config.synth.kind),
                       result.dataset.user_count(), result.dataset.item_count(), result.dataset.interactions().size());
  });
}

void stage_dataset(const RunConfig& config, std::ostream& log) {
  if (config.dataset.kind == SourceKind::synth) {
    stage_synth(config, log);
  } else {
    stage_ingest(config, log);
  }
}

void stage_gen_cases(const RunConfig& config, std::ostream& log) {
  as_stage("gen-cases", [&] {
    const Artifacts a(config.output_dir);
    require(a.dataset() / "manifest.json", "ingest/synth");
    const Dataset ds = load_store(a.dataset());
    const auto schema = schema_for(config, ds);
    const auto matrix = config.standard_matrix ? standard_case_matrix(schema, config.matrix_count) : config.rows;
    validate_matrix(matrix, schema, config.cases);
    const auto result = generate_cases(ds, schema, matrix, config.seed, config.cases);
    {
      auto out = open_output(a.cases());
      write_cases_jsonl(out, result.cases);
    }
    {
      auto out = open_output(a.case_skips());
      write_skip_report(out, result.rows);
    }
    {
      auto out = open_output(a.case_rows());
      write_row_summary(out, result.rows);
    }
    std::size_t short_rows = 0;
    for (const auto& r : result.rows) short_rows += r.short_of_request() ? 1 : 0;
    log << fmt::format("gen-cases: {} cases over {} rows ({} short of request)\n", result.cases.size(),
                       result.rows.size(), short_rows);
  });
}

void stage_rank(const RunConfig& config, std::ostream& log) {
  as_stage("rank", [&] {
    const Artifacts a(config.output_dir);
    require(a.cases(), "gen-cases");
    const Dataset ds = load_store(a.dataset());
    const auto titles = ds.title_map();
    const auto cases = read_cases_jsonl(a.cases());
    std::optional<GroundTruth> truth;
    if (fs::exists(a.ground_truth())) truth = GroundTruth::load(a.ground_truth());
    const PromptTemplate tmpl =
        config.prompt_template ? PromptTemplate::from_file(*config.prompt_template) : PromptTemplate::for_domain(ds.domain());

    if (!config.cache_path.parent_path().empty()) fs::create_directories(config.cache_path.parent_path());
    ResponseCache cache(config.cache_path);
    for (const auto& w : cache.warnings()) log << "warning: " << w << '\n';

    AdapterContext context;
    context.dataset = &ds;
    context.truth = truth ? &*truth : nullptr;
    context.titles = &titles;
    context.cache = &cache;
    context.seed = config.seed;
    context.n_items = config.top_n;

    std::vector<ResponseRecord> all;
    for (const auto& spec : config.models) {
      auto adapter = make_adapter(spec, context);
      std::vector<ResponseRecord> records(cases.size());
      std::atomic<std::size_t> next{0};
      std::atomic<std::size_t> remote_calls{0};
      std::exception_ptr failure;
      std::mutex failure_mutex;

      auto work = [&] {
        for (;;) {
          const std::size_t i = next++;
          if (i >= cases.size()) return;
          const auto& c = cases[i];
          auto& rec = records[i];
          rec.case_id = c.case_id;
          rec.model = spec.name;
          rec.response.case_id = c.case_id;
          try {
            const auto prompt = render_prompt(c, titles, tmpl, config.top_n);
            std::string raw;
            if (spec.remote()) {
              const auto hash = prompt_hash(prompt.text);
              if (auto hit = cache.get(c.case_id, spec.name, hash)) {
                raw = hit->response;
              } else {
                ++remote_calls;
                raw = adapter->respond(c, prompt);
                cache.put(c.case_id, spec.name, hash, raw);
              }
            } else {
              raw = adapter->respond(c, prompt);
            }
            rec.response = parse_response(raw, c, titles, config.top_n);
          } catch (const AdapterError& e) {
            rec.error = e.what();
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = cases.size();
            return;
          }
        }
      };
      const std::size_t workers = spec.remote() ? std::min(spec.max_in_flight, std::max<std::size_t>(cases.size(), 1)) : 1;
      std::vector<std::thread> pool;
      for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
      work();
      for (auto& t : pool) t.join();
      if (failure) std::rethrow_exception(failure);

      std::size_t errors = 0;
      for (const auto& r : records) errors += r.error.empty() ? 0 : 1;
      log << fmt::format("rank: {} answered {} cases ({} remote calls, {} failed)\n", spec.name, cases.size(),
                         remote_calls.load(), errors);
      for (auto& r : records) all.push_back(std::move(r));
    }
    auto out = open_output(a.responses());
    write_responses(out, all);
  });
}

void stage_score(const RunConfig& config, std::ostream& log) {
  as_stage("score", [&] {
    const Artifacts a(config.output_dir);
    require(a.responses(), "rank");
    const auto cases = read_cases_jsonl(a.cases());
    std::unordered_map<std::string, const EvalCase*> by_id;
    for (const auto& c : cases) by_id.emplace(c.case_id, &c);

    std::vector<ScoredCase> scored;
    std::vector<UnscoredCase> unscored;
    for (const auto& r : read_responses(a.responses())) {
      auto it = by_id.find(r.case_id);
      if (it == by_id.end()) throw InputError("response for unknown case " + r.case_id, a.responses().string());
      if (!r.error.empty()) {
        unscored.push_back({r.case_id, r.model, r.error});
        continue;
      }
      auto outcome = score_case(*it->second, r.response, r.model, config.policy, config.top_n, config.eps);
      if (auto* s = std::get_if<ScoredCase>(&outcome)) {
        scored.push_back(std::move(*s));
      } else {
        unscored.push_back(std::get<UnscoredCase>(std::move(outcome)));
      }
    }
    {
      auto out = open_output(a.scores());
      write_scores_csv(out, scored);
    }
    {
      auto out = open_output(a.unscored());
      write_unscored_csv(out, unscored);
    }
    log << fmt::format("score: {} scored, {} unscored\n", scored.size(), unscored.size());
  });
}

void stage_fit(const RunConfig& config, std::ostream& log) {
  as_stage("fit", [&] {
    const Artifacts a(config.output_dir);
    require(a.scores(), "score");
    const auto report = fit_scores(read_scores_csv(a.scores()), config.curves);
    auto out = open_output(a.fit());
    write_fit_json(out, report);
    for (const auto& [model, facets] : report.models) {
      const auto& overall = facets.at("overall");
      log << fmt::format("fit: {} x* = {:.4f} ({}), mean CE-H = {:.4f}\n", model, overall.inflection.x,
                         to_string(overall.inflection.flag), overall.deviation.mean);
    }
  });
}

void stage_report(const RunConfig& config, std::ostream& log) {
  as_stage("report", [&] {
    const Artifacts a(config.output_dir);
    require(a.scores(), "score");
    const auto report = fit_scores(read_scores_csv(a.scores()), config.curves);
    if (report.models.empty()) throw InputError("no scored cases to report", a.scores().string());
    const auto files = emit_report(report, a.dir);
    log << fmt::format("report: {} files under {}\n", files.size(), a.dir.string());
  });
}

void run_pipeline(const RunConfig& config, std::ostream& log) {
  record_config(config);
  stage_dataset(config, log);
  stage_gen_cases(config, log);
  stage_rank(config, log);
  stage_score(config, log);
  stage_fit(config, log);
  stage_report(config, log);
}

}  // namespace bxent
