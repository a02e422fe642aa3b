#include "qalign/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "qalign/chain_io.hpp"
#include "qalign/diagnostics.hpp"
#include "qalign/enumerable_space.hpp"
#include "qalign/extreme_value.hpp"
#include "qalign/mixture.hpp"
#include "qalign/openai_backends.hpp"
#include "qalign/parallel.hpp"
#include "qalign/sampler.hpp"
#include "qalign/svg.hpp"
#include "qalign/toml_lite.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace qalign {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::qalign: return "qalign";
    case Method::bon: return "bon";
    case Method::mv: return "mv";
    case Method::wmv: return "wmv";
  }
  return "qalign";
}

Method parse_method(std::string_view name) {
  if (name == "qalign") return Method::qalign;
  if (name == "bon") return Method::bon;
  if (name == "mv") return Method::mv;
  if (name == "wmv") return Method::wmv;
  throw Error("unknown method '" + std::string(name) + "' (expected qalign, bon, mv or wmv)");
}

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(std::string("config key '") + key + "' has the wrong type");
  }
}

BackendSpec backend_from_json(const json& j, const fs::path& base, const char* section) {
  if (!j.is_object()) throw Error(std::string("config needs a [") + section + "] table");
  BackendSpec b;
  b.kind = get_or<std::string>(j, "kind", "toy");
  if (j.contains("space")) b.space = resolve(base, j.at("space").get<std::string>());
  if (j.contains("fixture")) b.fixture = resolve(base, j.at("fixture").get<std::string>());
  b.base_url = get_or<std::string>(j, "base_url", "");
  b.api_key_env = get_or<std::string>(j, "api_key_env", "");
  b.model = get_or<std::string>(j, "model", "");
  b.temperature = get_or<double>(j, "temperature", 1.0);
  b.param_count = get_or<std::int64_t>(j, "param_count", 1);
  b.unit = parse_unit_kind(get_or<std::string>(j, "unit", "word"));
  b.timeout_ms = get_or<int>(j, "timeout_ms", 60000);
  b.max_retries = get_or<int>(j, "max_retries", 3);
  b.record = get_or<bool>(j, "record", false);
  static const std::set<std::string> kinds{"toy", "http", "fixture", "exact_match"};
  if (!kinds.count(b.kind)) throw Error(std::string("[") + section + "] kind '" + b.kind + "' is not supported");
  return b;
}

void check_prompt_id(const std::string& id) {
  if (id.empty() || id == "." || id == "..") throw Error("invalid prompt id '" + id + "'");
  for (char c : id) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) {
      throw Error("prompt id '" + id + "' may only contain letters, digits, '-', '_' and '.'");
    }
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

nlohmann::ordered_json BackendSpec::to_json() const {
  ordered_json j;
  j["kind"] = kind;
  if (space) j["space"] = space->string();
  if (fixture) j["fixture"] = fixture->string();
  if (!base_url.empty()) j["base_url"] = base_url;
  if (!api_key_env.empty()) j["api_key_env"] = api_key_env;
  if (!model.empty()) j["model"] = model;
  j["temperature"] = temperature;
  j["param_count"] = param_count;
  j["unit"] = std::string(qalign::to_string(unit));
  j["timeout_ms"] = timeout_ms;
  j["max_retries"] = max_retries;
  j["record"] = record;
  return j;
}

RunConfig RunConfig::from_json(const json& j, const fs::path& base) {
  RunConfig c;
  c.run_id = get_or<std::string>(j, "run_id", "");
  c.method = parse_method(get_or<std::string>(j, "method", "qalign"));
  c.seed = get_or<std::uint64_t>(j, "seed", 0);
  if (!j.contains("prompts")) throw Error("config needs a 'prompts' file");
  c.prompts = resolve(base, j.at("prompts").get<std::string>());
  if (j.contains("template_id")) c.template_id = j.at("template_id").get<std::string>();
  if (j.contains("template_dir")) c.template_dir = resolve(base, j.at("template_dir").get<std::string>());
  c.budget_schedule = get_or<std::vector<std::int64_t>>(j, "budget_schedule", {});
  if (j.contains("beta")) c.beta = j.at("beta").get<double>();
  c.steps = get_or<std::int64_t>(j, "steps", 0);
  c.max_len = get_or<std::int64_t>(j, "max_len", 64);
  c.temperature = get_or<double>(j, "temperature", 1.0);
  c.utility = parse_utility(get_or<std::string>(j, "utility", "exact_match"));
  c.extractor = parse_answer_extractor(get_or<std::string>(j, "extractor", "identity"));
  c.workers = get_or<std::size_t>(j, "workers", 1);
  c.generator = backend_from_json(j.value("generator", json::object()), base, "generator");
  c.reward = backend_from_json(j.value("reward", json::object()), base, "reward");
  if (j.contains("tuning")) {
    const json& t = j.at("tuning");
    c.tuning.target_rate = get_or<double>(t, "target_rate", 0.5);
    c.tuning.tolerance = get_or<double>(t, "tolerance", 0.05);
    c.tuning.max_rounds = get_or<int>(t, "max_rounds", 12);
    c.tuning.log_beta_min = get_or<double>(t, "log_beta_min", -6.0);
    c.tuning.log_beta_max = get_or<double>(t, "log_beta_max", 6.0);
    c.tuning.pilot_steps = get_or<std::int64_t>(t, "pilot_steps", 32);
  }
  c.tuning.max_len = c.max_len;
  c.tuning.seed = c.seed;
  c.tuning.workers = c.workers;
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  json j = load_toml(path);
  RunConfig c = from_json(j, fs::absolute(path).parent_path());
  c.validate();
  return c;
}

void RunConfig::validate() const {
  if (run_id.empty()) throw Error("config needs a run_id");
  check_prompt_id(run_id);
  if (budget_schedule.empty()) throw Error("config needs a non-empty budget_schedule");
  for (std::size_t i = 0; i < budget_schedule.size(); ++i) {
    if (budget_schedule[i] < 1) throw Error("budget_schedule entries must be >= 1");
    if (i > 0 && budget_schedule[i] <= budget_schedule[i - 1]) {
      throw Error("budget_schedule must be strictly increasing");
    }
  }
  if ((method == Method::qalign || method == Method::wmv) && !beta) {
    throw Error(std::string("method ") + std::string(qalign::to_string(method)) + " requires beta");
  }
  if (beta) BetaParam check(*beta);
  if (max_len < 1) throw Error("max_len must be >= 1");
  if (workers < 1) throw Error("workers must be >= 1");
  if (method == Method::qalign) {
    if (chain_steps() < 1) throw Error("qalign needs at least one step (budget_schedule maximum >= 2 or steps >= 1)");
    if (budget_schedule.back() > chain_steps() + 1) {
      throw Error("budget_schedule exceeds the T + 1 = " + std::to_string(chain_steps() + 1) + " chain states");
    }
  }
  if (generator.kind == "exact_match") throw Error("exact_match is a reward kind, not a generator");
  if (generator.kind == "toy" && !generator.space) throw Error("toy generator needs a 'space' file");
  if (generator.kind == "fixture" && !generator.fixture) throw Error("fixture generator needs a 'fixture' file");
  if (reward.kind == "fixture" && !reward.fixture) throw Error("fixture reward needs a 'fixture' file");
  if (reward.kind == "toy" && !reward.space && !generator.space) throw Error("toy reward needs a 'space' file");
  if ((generator.kind == "http" || generator.kind == "fixture") && generator.model.empty()) {
    throw Error("completions generator needs a model name");
  }
  if (generator.kind == "http" && generator.base_url.empty()) throw Error("http generator needs base_url");
  if (reward.kind == "http" && reward.base_url.empty()) throw Error("http reward needs base_url");
  if (generator.temperature != temperature) {
    throw Error("generator temperature " + fmt(generator.temperature) +
                " must equal the sampling temperature " + fmt(temperature) + " (suffix proposals reuse it)");
  }
}

std::int64_t RunConfig::chain_steps() const {
  if (steps > 0) return steps;
  return budget_schedule.empty() ? 0 : budget_schedule.back() - 1;
}

std::int64_t RunConfig::sample_count() const {
  return method == Method::qalign ? chain_steps() + 1 : budget_schedule.back();
}

nlohmann::ordered_json RunConfig::to_json() const {
  ordered_json j;
  j["run_id"] = run_id;
  j["method"] = std::string(qalign::to_string(method));
  j["seed"] = seed;
  j["prompts"] = prompts.string();
  if (template_id) j["template_id"] = *template_id;
  if (template_dir) j["template_dir"] = template_dir->string();
  j["budget_schedule"] = budget_schedule;
  if (beta) j["beta"] = *beta;
  j["steps"] = method == Method::qalign ? chain_steps() : 0;
  j["max_len"] = max_len;
  j["temperature"] = temperature;
  j["utility"] = std::string(qalign::to_string(utility));
  j["extractor"] = std::string(qalign::to_string(extractor));
  j["generator"] = generator.to_json();
  j["reward"] = reward.to_json();
  return j;
}

std::vector<Prompt> load_prompts(const fs::path& path, const std::optional<std::string>& template_id) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read prompts file " + path.string());
  std::vector<Prompt> prompts;
  std::set<std::string> ids;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw Error("malformed prompts file " + path.string() + " at line " + std::to_string(lineno));
    }
    Prompt p;
    p.id = j.contains("id") && j.at("id").is_number() ? std::to_string(j.at("id").get<long long>())
                                                      : get_or<std::string>(j, "id", "");
    p.text = get_or<std::string>(j, "question", "");
    if (j.contains("metadata")) {
      for (const auto& [k, v] : j.at("metadata").items()) p.metadata[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
    if (j.contains("gold") && !j.at("gold").is_null()) {
      p.metadata["gold"] = j.at("gold").is_string() ? j.at("gold").get<std::string>() : j.at("gold").dump();
    }
    if (j.contains("template_id")) {
      p.template_id = j.at("template_id").get<std::string>();
    } else {
      p.template_id = template_id;
    }
    try {
      p.validate();
      check_prompt_id(p.id);
    } catch (const Error& e) {
      throw Error(path.string() + " line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!ids.insert(p.id).second) throw Error("duplicate prompt id '" + p.id + "' in " + path.string());
    prompts.push_back(std::move(p));
  }
  if (prompts.empty()) throw Error("prompts file " + path.string() + " is empty");
  return prompts;
}

// ---------------------------------------------------------------------------------------------
// Backends

struct BackendSet::Impl {
  std::optional<EnumerableSpace> gen_space;
  std::optional<EnumerableSpace> reward_space;
  std::unique_ptr<FixtureRecorder> recorder;
  std::map<std::string, std::unique_ptr<FixtureTransport>> fixtures;
  std::vector<std::unique_ptr<HttpTransport>> http;
  std::unique_ptr<GenerationBackend> generator;
  std::unique_ptr<RewardBackend> reward;

  Transport& transport_for(const BackendSpec& spec) {
    if (spec.kind == "fixture") {
      std::string key = fs::weakly_canonical(*spec.fixture).string();
      auto& slot = fixtures[key];
      if (!slot) slot = std::make_unique<FixtureTransport>(*spec.fixture);
      return *slot;
    }
    HttpSettings s;
    s.base_url = spec.base_url;
    s.api_key_env = spec.api_key_env;
    s.timeout = std::chrono::milliseconds(spec.timeout_ms);
    s.max_retries = spec.max_retries;
    http.push_back(std::make_unique<HttpTransport>(s, spec.record ? recorder.get() : nullptr));
    return *http.back();
  }
};

BackendSet::BackendSet(const RunConfig& cfg, const std::optional<fs::path>& record_dir) : impl_(std::make_unique<Impl>()) {
  const bool wants_record = (cfg.generator.kind == "http" && cfg.generator.record) ||
                            (cfg.reward.kind == "http" && cfg.reward.record);
  if (wants_record && record_dir) {
    impl_->recorder = std::make_unique<FixtureRecorder>(*record_dir / "fixtures.jsonl");
    recorder_ = impl_->recorder.get();
  }
  replaying_ = cfg.generator.kind == "fixture" || cfg.reward.kind == "fixture";

  const BackendSpec& g = cfg.generator;
  if (g.kind == "toy") {
    impl_->gen_space = EnumerableSpace::load(*g.space);
    impl_->generator = std::make_unique<ToyGenerator>(*impl_->gen_space, g.param_count, g.temperature);
  } else {
    CompletionSettings s{g.model, g.temperature, g.param_count, g.unit, cfg.template_dir};
    impl_->generator = std::make_unique<CompletionsGenerator>(impl_->transport_for(g), s);
  }

  const BackendSpec& r = cfg.reward;
  if (r.kind == "toy") {
    if (r.space) {
      impl_->reward_space = EnumerableSpace::load(*r.space);
      impl_->reward = std::make_unique<ToyReward>(*impl_->reward_space, r.param_count);
    } else {
      if (!impl_->gen_space) impl_->gen_space = EnumerableSpace::load(*g.space);
      impl_->reward = std::make_unique<ToyReward>(*impl_->gen_space, r.param_count);
    }
  } else if (r.kind == "exact_match") {
    impl_->reward = std::make_unique<ExactMatchReward>(cfg.extractor);
  } else {
    impl_->reward = std::make_unique<ScoreEndpointReward>(impl_->transport_for(r), r.param_count, cfg.template_dir);
  }
  generator_ = impl_->generator.get();
  reward_ = impl_->reward.get();
}

BackendSet::~BackendSet() = default;

// ---------------------------------------------------------------------------------------------
// run

namespace {

struct StoredSample {
  Sequence seq;
  std::int64_t tokens_generated = 0;
  std::optional<double> reward;
};

ordered_json sample_json(std::size_t index, const StoredSample& s) {
  ordered_json j;
  j["index"] = index;
  j["text"] = s.seq.text();
  j["len"] = s.seq.length();
  j["tokens_generated"] = s.tokens_generated;
  j["reward"] = s.reward ? ordered_json(*s.reward) : ordered_json(nullptr);
  return j;
}

std::vector<StoredSample> read_samples(const fs::path& path, UnitKind unit) {
  std::vector<StoredSample> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      if (in.peek() == std::char_traits<char>::eof()) break;  // torn final line
      throw Error("malformed sample record in " + path.string());
    }
    if (j.at("index").get<std::size_t>() != out.size()) throw Error("sample file " + path.string() + " has a gap");
    StoredSample s{Sequence::parse(j.at("text").get<std::string>(), unit), j.at("tokens_generated").get<std::int64_t>(),
                   std::nullopt};
    if (!j.at("reward").is_null()) s.reward = j.at("reward").get<double>();
    out.push_back(std::move(s));
  }
  return out;
}

/// Ledger of the first k samples of a batch: each sample's generated tokens plus, when rewards
/// are used, the length of every distinct response the first time it is scored.
ComputeLedger prefix_ledger(const std::vector<const Sequence*>& scored_in_order, const std::vector<std::int64_t>& gen,
                            std::size_t k, std::int64_t gp, std::int64_t rp) {
  ComputeLedger l;
  l.generator_params = gp;
  l.reward_params = rp;
  for (std::size_t i = 0; i < k && i < gen.size(); ++i) l.add_generated(gen[i]);
  std::set<std::string> seen;
  for (const Sequence* s : scored_in_order) {
    if (seen.insert(s->text()).second) l.add_scored(static_cast<std::int64_t>(s->length()));
  }
  return l;
}

struct PromptOutcome {
  ComputeLedger ledger;
};

DecisionReport decide(Method method, std::span<const Sequence> samples, std::span<const double> rewards,
                      std::optional<double> beta, const Utility& utility) {
  DecisionReport rep;
  rep.method = std::string(to_string(method));
  rep.n_samples = samples.size();
  std::size_t chosen = 0;
  const double n = static_cast<double>(samples.size());
  switch (method) {
    case Method::qalign:
    case Method::mv: {
      MbrResult m = mbr_select(samples, std::nullopt, utility);
      chosen = m.index;
      rep.expected_utility = m.expected_utility;
      rep.weights_entropy = std::log(n);
      break;
    }
    case Method::wmv: {
      ISWeights w = is_weights(rewards, *beta);
      MbrResult m = mbr_select(samples, w, utility);
      chosen = m.index;
      rep.expected_utility = m.expected_utility;
      rep.weights_entropy = w.entropy();
      break;
    }
    case Method::bon: {
      chosen = argmax_reward(rewards);
      // Expected utility of the pick against the base samples it was chosen from.
      double u = 0.0;
      for (const auto& s : samples) u += utility(samples[chosen], s);
      rep.expected_utility = u / n;
      rep.weights_entropy = 0.0;
      break;
    }
  }
  rep.selected_text = samples[chosen].text();
  rep.selected_answer = extract_answer(utility.extractor(), rep.selected_text);
  return rep;
}

void write_decisions(const fs::path& path, const RunConfig& cfg, std::span<const Sequence> samples,
                     std::span<const double> rewards, const std::vector<ComputeLedger>& ledgers) {
  const Utility utility(cfg.utility, cfg.extractor);
  std::string out;
  for (std::size_t b = 0; b < cfg.budget_schedule.size(); ++b) {
    const auto k = static_cast<std::size_t>(cfg.budget_schedule[b]);
    DecisionReport rep = decide(cfg.method, samples.first(k), rewards.empty() ? rewards : rewards.first(k), cfg.beta,
                                utility);
    ordered_json line;
    line["budget"] = k;
    line["flops"] = ledgers[b].flops();
    line["tokens"] = ledgers[b].generated_tokens;
    line["generated_tokens"] = ledgers[b].generated_tokens;
    line["scored_tokens"] = ledgers[b].scored_tokens;
    line["report"] = rep.to_json();
    out += line.dump() + "\n";
  }
  write_text(path, out);
}

PromptOutcome run_qalign_prompt(const RunConfig& cfg, const Prompt& x, BackendSet& backends, const fs::path& dir) {
  GenerationBackend& gen = backends.generator();
  const fs::path chain_path = dir / "chain_0.jsonl";
  std::vector<ChainRecord> done;
  if (fs::exists(chain_path)) {
    done = read_chain(chain_path, gen.unit_kind());
    if (static_cast<std::int64_t>(done.size()) > cfg.chain_steps() + 1) {
      throw Error("resume conflict: " + chain_path.string() + " holds more records than T + 1");
    }
    // Drop a torn trailing line before appending.
    std::string clean;
    for (const auto& r : done) clean += to_json(r).dump() + "\n";
    write_text(chain_path, clean);
  }

  QAlignConfig qc;
  qc.beta = BetaParam(*cfg.beta);
  qc.steps = cfg.chain_steps();
  qc.max_len = cfg.max_len;
  qc.seed = chain_seed(cfg.seed, x.id, 0);
  qc.temperature = cfg.temperature;

  RewardCache cache(backends.reward());
  ChainWriter writer(chain_path, static_cast<std::int64_t>(done.size()));
  ChainResult chain = qalign_chain(qc, x, gen, cache, [&](const ChainRecord& r) { writer.append(r); }, done);

  std::vector<Sequence> samples;
  std::vector<std::int64_t> gen_tokens;
  for (const auto& r : chain.records) {
    samples.push_back(r.state.seq);
    gen_tokens.push_back(r.tokens_generated);
  }
  // Reward calls in chain order: y^0, then every proposal (repeats of the current state hit the cache).
  std::vector<ComputeLedger> ledgers;
  for (std::int64_t k : cfg.budget_schedule) {
    std::vector<const Sequence*> scored;
    for (std::size_t t = 0; t < static_cast<std::size_t>(k); ++t) {
      const auto& r = chain.records[t];
      scored.push_back(t == 0 ? &r.state.seq : &r.proposal->seq);
    }
    ledgers.push_back(prefix_ledger(scored, gen_tokens, static_cast<std::size_t>(k), gen.param_count(),
                                    backends.reward().param_count()));
  }
  write_decisions(dir / "decisions.jsonl", cfg, samples, {}, ledgers);

  std::vector<const Sequence*> all;
  for (std::size_t t = 0; t < chain.records.size(); ++t) {
    all.push_back(t == 0 ? &chain.records[t].state.seq : &chain.records[t].proposal->seq);
  }
  return PromptOutcome{
      prefix_ledger(all, gen_tokens, gen_tokens.size(), gen.param_count(), backends.reward().param_count())};
}

PromptOutcome run_batch_prompt(const RunConfig& cfg, const Prompt& x, BackendSet& backends, const fs::path& dir) {
  GenerationBackend& gen = backends.generator();
  const fs::path path = dir / "samples.jsonl";
  std::vector<StoredSample> samples = read_samples(path, gen.unit_kind());
  const auto n = static_cast<std::size_t>(cfg.sample_count());
  if (samples.size() > n) throw Error("resume conflict: " + path.string() + " holds more samples than configured");
  {
    std::string clean;
    for (std::size_t i = 0; i < samples.size(); ++i) clean += sample_json(i, samples[i]).dump() + "\n";
    write_text(path, clean);
  }
  const bool scored = cfg.method != Method::mv;
  const std::uint64_t seed = chain_seed(cfg.seed, x.id, 0);
  RewardCache cache(backends.reward());
  ComputeLedger scratch;
  std::ofstream out(path, std::ios::app | std::ios::binary);
  for (std::size_t k = samples.size(); k < n; ++k) {
    SampleBatch one = independent_samples(x, gen, k + 1, cfg.max_len, seed, k);
    if (one.samples.empty()) {
      throw Error("prompt '" + x.id + "': backend failed after " + std::to_string(k) + " of " + std::to_string(n) +
                  " samples (" + one.error.value_or("unknown error") + "); rerun to resume");
    }
    StoredSample s{one.samples.front(), one.tokens_generated.front(), std::nullopt};
    if (scored) s.reward = cache.score(x, s.seq, scratch);
    out << sample_json(k, s).dump() << '\n';
    out.flush();
    samples.push_back(std::move(s));
  }
  out.close();

  std::vector<Sequence> seqs;
  std::vector<double> rewards;
  std::vector<std::int64_t> gen_tokens;
  for (const auto& s : samples) {
    seqs.push_back(s.seq);
    gen_tokens.push_back(s.tokens_generated);
    if (scored) {
      // Samples restored from an mv run carry no reward; score them now.
      rewards.push_back(s.reward ? *s.reward : cache.score(x, s.seq, scratch));
    }
  }
  const std::int64_t rp = scored ? backends.reward().param_count() : 0;
  auto ledger_at = [&](std::size_t k) {
    std::vector<const Sequence*> order;
    if (scored) {
      for (std::size_t i = 0; i < k; ++i) order.push_back(&seqs[i]);
    }
    return prefix_ledger(order, gen_tokens, k, gen.param_count(), rp);
  };
  std::vector<ComputeLedger> ledgers;
  for (std::int64_t k : cfg.budget_schedule) ledgers.push_back(ledger_at(static_cast<std::size_t>(k)));
  write_decisions(dir / "decisions.jsonl", cfg, seqs, rewards, ledgers);
  return PromptOutcome{ledger_at(seqs.size())};
}

ordered_json ledger_json(const ComputeLedger& l) {
  ordered_json j;
  j["generator_params"] = l.generator_params;
  j["reward_params"] = l.reward_params;
  j["generated_tokens"] = l.generated_tokens;
  j["scored_tokens"] = l.scored_tokens;
  j["flops"] = l.flops();
  return j;
}

}  // namespace

fs::path cmd_run(const RunConfig& cfg, const RunOptions& options) {
  cfg.validate();
  const fs::path run_dir = options.runs_root / cfg.run_id;
  fs::create_directories(run_dir);
  const fs::path meta_path = run_dir / "run.json";
  const ordered_json config_json = cfg.to_json();
  if (fs::exists(meta_path)) {
    json stored = json::parse(read_text(meta_path), nullptr, false);
    if (stored.is_discarded() || !stored.contains("config") ||
        json(stored.at("config")) != json::parse(config_json.dump())) {
      throw Error("resume conflict: " + run_dir.string() + " was created with a different configuration");
    }
  } else {
    ordered_json meta;
    meta["config"] = config_json;
    meta["complete"] = false;
    write_text(meta_path, meta.dump(2) + "\n");
  }
  if (options.config_source) fs::copy_file(*options.config_source, run_dir / "config.toml", fs::copy_options::overwrite_existing);
  if (fs::absolute(cfg.prompts) != fs::absolute(run_dir / "prompts.jsonl")) {
    fs::copy_file(cfg.prompts, run_dir / "prompts.jsonl", fs::copy_options::overwrite_existing);
  }

  const std::vector<Prompt> prompts = load_prompts(cfg.prompts, cfg.template_id);
  BackendSet backends(cfg, run_dir);
  if (backends.generator().unit_kind() != cfg.generator.unit && cfg.generator.kind != "toy") {
    throw Error("generator unit mismatch");
  }
  std::size_t workers = options.workers.value_or(cfg.workers);
  if (backends.replaying() || backends.recording()) workers = 1;

  std::vector<PromptOutcome> outcomes(prompts.size());
  parallel_for(prompts.size(), workers, [&](std::size_t i) {
    const fs::path dir = run_dir / prompts[i].id;
    fs::create_directories(dir);
    outcomes[i] = cfg.method == Method::qalign ? run_qalign_prompt(cfg, prompts[i], backends, dir)
                                               : run_batch_prompt(cfg, prompts[i], backends, dir);
  });

  ComputeLedger total;
  total.generator_params = backends.generator().param_count();
  total.reward_params = cfg.method == Method::mv ? 0 : backends.reward().param_count();
  ordered_json per_prompt = ordered_json::array();
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    total += outcomes[i].ledger;
    ordered_json p;
    p["id"] = prompts[i].id;
    p["ledger"] = ledger_json(outcomes[i].ledger);
    per_prompt.push_back(p);
  }
  ordered_json meta;
  meta["config"] = config_json;
  meta["complete"] = true;
  meta["unit"] = std::string(to_string(backends.generator().unit_kind()));
  meta["n_prompts"] = prompts.size();
  meta["samples_per_prompt"] = cfg.sample_count();
  meta["ledger"] = ledger_json(total);
  meta["prompts"] = per_prompt;
  write_text(meta_path, meta.dump(2) + "\n");
  return run_dir;
}

// ---------------------------------------------------------------------------------------------
// curve

CurveResult cmd_curve(const std::vector<fs::path>& run_dirs, const fs::path& out_dir,
                      const std::optional<fs::path>& gold) {
  if (run_dirs.empty()) throw Error("curve needs at least one run directory");
  fs::create_directories(out_dir);
  CurveResult res;
  std::map<std::string, std::string> gold_override;
  if (gold) {
    for (const auto& p : load_prompts(*gold, std::nullopt)) {
      if (auto it = p.metadata.find("gold"); it != p.metadata.end()) gold_override[p.id] = it->second;
    }
  }

  std::string csv = "method,run_id,budget,flops,tokens,metric,metric_kind\n";
  std::vector<SvgSeries> series;
  for (const auto& dir : run_dirs) {
    json meta = json::parse(read_text(dir / "run.json"));
    if (!meta.value("complete", false)) throw Error("run " + dir.string() + " is incomplete; rerun it to finish");
    const json& c = meta.at("config");
    const std::string run_id = c.at("run_id").get<std::string>();
    const std::string method = c.at("method").get<std::string>();
    const auto schedule = c.at("budget_schedule").get<std::vector<std::int64_t>>();
    const std::vector<Prompt> prompts = load_prompts(dir / "prompts.jsonl", std::nullopt);

    bool have_gold = true;
    std::vector<std::optional<std::string>> golds;
    for (const auto& p : prompts) {
      std::optional<std::string> g;
      if (auto it = gold_override.find(p.id); it != gold_override.end()) {
        g = it->second;
      } else if (auto m = p.metadata.find("gold"); m != p.metadata.end()) {
        g = m->second;
      }
      have_gold = have_gold && g.has_value();
      golds.push_back(g);
    }
    if (!have_gold) {
      res.warnings.push_back("run " + run_id + ": gold answers missing for some prompts; plotting 1 - mean expected "
                             "utility instead of error");
    }

    std::vector<double> flops(schedule.size(), 0.0), metric(schedule.size(), 0.0);
    std::vector<std::int64_t> tokens(schedule.size(), 0);
    for (std::size_t p = 0; p < prompts.size(); ++p) {
      std::ifstream in(dir / prompts[p].id / "decisions.jsonl");
      if (!in) throw Error("missing decisions for prompt '" + prompts[p].id + "' in " + dir.string());
      std::string line;
      std::size_t b = 0;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (b >= schedule.size()) throw Error("unexpected extra decision line for '" + prompts[p].id + "'");
        json d = json::parse(line);
        if (d.at("budget").get<std::int64_t>() != schedule[b]) throw Error("decision budgets do not match schedule");
        flops[b] += d.at("flops").get<double>();
        tokens[b] += d.at("tokens").get<std::int64_t>();
        const json& rep = d.at("report");
        if (have_gold) {
          metric[b] += rep.at("selected_answer").get<std::string>() == normalize_answer(*golds[p]) ? 1.0 : 0.0;
        } else {
          metric[b] += rep.at("expected_utility").get<double>();
        }
        ++b;
      }
      if (b != schedule.size()) throw Error("decisions for '" + prompts[p].id + "' are incomplete");
    }

    BudgetCurve curve(method);
    SvgSeries s{run_id + " (" + method + ")", {}, {}};
    for (std::size_t b = 0; b < schedule.size(); ++b) {
      const double m = 1.0 - metric[b] / static_cast<double>(prompts.size());
      curve.add_point(BudgetPoint{flops[b], tokens[b], std::clamp(m, 0.0, 1.0)});
    }
    for (std::size_t b = 0; b < schedule.size(); ++b) {
      const auto& pt = curve.points()[b];
      csv += method + "," + run_id + "," + std::to_string(schedule[b]) + "," + fmt(pt.flops) + "," +
             std::to_string(pt.tokens) + "," + fmt(pt.metric) + "," + (have_gold ? "error" : "one_minus_utility") +
             "\n";
      s.xs.push_back(pt.flops);
      s.ys.push_back(pt.metric);
    }
    series.push_back(std::move(s));
  }
  res.csv = out_dir / "curve.csv";
  res.svg = out_dir / "curve.svg";
  write_text(res.csv, csv);
  bool positive = true;
  for (const auto& s : series) {
    for (double x : s.xs) positive = positive && x > 0.0;
  }
  write_text(res.svg, svg_line_chart(SvgAxes{"Error vs inference compute", "FLOPs", "error", positive}, series));
  return res;
}

// ---------------------------------------------------------------------------------------------
// tune-beta

TuneResult cmd_tune_beta(const RunConfig& cfg, std::size_t pilots) {
  std::vector<Prompt> prompts = load_prompts(cfg.prompts, cfg.template_id);
  if (pilots > 0 && prompts.size() > pilots) prompts.resize(pilots);
  BackendSet backends(cfg, std::nullopt);
  TuneOptions opt = cfg.tuning;
  opt.max_len = cfg.max_len;
  opt.seed = cfg.seed;
  opt.workers = backends.replaying() ? 1 : cfg.workers;
  return tune_beta(prompts, backends.generator(), backends.reward(), opt);
}

nlohmann::ordered_json to_json(const TuneResult& r) {
  ordered_json j;
  j["beta"] = r.beta.value();
  j["acceptance_rate"] = r.rate;
  j["rounds"] = r.rounds;
  ordered_json trace = ordered_json::array();
  for (const auto& p : r.trace) trace.push_back(ordered_json{{"beta", p.beta}, {"rate", p.rate}});
  j["trace"] = trace;
  j["warning"] = r.warning ? ordered_json(*r.warning) : ordered_json(nullptr);
  return j;
}

// ---------------------------------------------------------------------------------------------
// analyze

namespace {

std::vector<std::pair<std::string, std::vector<double>>> collect_rewards(const AnalyzeOptions& o) {
  std::vector<std::pair<std::string, std::vector<double>>> out;
  if (o.rewards) {
    std::ifstream in(*o.rewards);
    if (!in) throw Error("cannot read rewards file " + o.rewards->string());
    std::string line;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      json j = json::parse(line);
      out.emplace_back(j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump(),
                       j.at("rewards").get<std::vector<double>>());
    }
  }
  if (o.run_dir) {
    json meta = json::parse(read_text(*o.run_dir / "run.json"));
    const UnitKind unit = parse_unit_kind(meta.value("unit", std::string("word")));
    for (const auto& p : load_prompts(*o.run_dir / "prompts.jsonl", std::nullopt)) {
      const fs::path samples = *o.run_dir / p.id / "samples.jsonl";
      if (!fs::exists(samples)) {
        throw Error("analyze needs independent samples with rewards (bon or wmv runs); " + samples.string() +
                    " does not exist");
      }
      std::vector<double> r;
      for (const auto& s : read_samples(samples, unit)) {
        if (!s.reward) throw Error(samples.string() + " has unscored samples (mv runs carry no rewards)");
        r.push_back(*s.reward);
      }
      out.emplace_back(p.id, std::move(r));
    }
  }
  return out;
}

double normal_pdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * M_PI));
}

}  // namespace

std::vector<fs::path> cmd_analyze(const AnalyzeOptions& o) {
  if (!o.rewards && !o.run_dir && !o.space) throw Error("analyze needs --rewards, --run or --space");
  fs::create_directories(o.out_dir);
  std::vector<fs::path> written;

  auto sets = collect_rewards(o);
  if (!sets.empty()) {
    std::string fits = "id,n_rewards,w1,w2,mu1,mu2,sigma1,sigma2,dominant_index,log_likelihood,iterations\n";
    std::string gum = "id,n,n_d,a_n,b_n,beta_star\n";
    for (const auto& [id, rewards] : sets) {
      MixtureFitOptions mo;
      mo.seed = mix_seed(o.seed, id);
      MixtureFit f;
      try {
        f = fit_reward_mixture(rewards, mo);
      } catch (const Error& e) {
        std::cerr << "warning: skipping '" << id << "': " << e.what() << "\n";
        continue;
      }
      fits += id + "," + std::to_string(rewards.size()) + "," + fmt(f.w1) + "," + fmt(f.w2) + "," + fmt(f.mu1) + "," +
              fmt(f.mu2) + "," + fmt(f.sigma1) + "," + fmt(f.sigma2) + "," + std::to_string(f.dominant_index) + "," +
              fmt(f.log_likelihood) + "," + std::to_string(f.iterations) + "\n";
      for (std::int64_t n : o.ns) {
        if (!(f.dominant_weight() * static_cast<double>(n) > M_E)) continue;
        GumbelApprox g = gumbel_approx(f, static_cast<double>(n));
        gum += id + "," + std::to_string(n) + "," + fmt(g.n_d) + "," + fmt(g.a_n) + "," + fmt(g.b_n) + "," +
               fmt(beta_star(f, static_cast<double>(n))) + "\n";
      }

      // Reward histogram with the fitted mixture density.
      double lo = *std::min_element(rewards.begin(), rewards.end());
      double hi = *std::max_element(rewards.begin(), rewards.end());
      SvgSeries mix{"mixture fit", {}, {}}, c1{"component 1", {}, {}}, c2{"component 2", {}, {}};
      for (int i = 0; i <= 200; ++i) {
        double x = lo + (hi - lo) * i / 200.0;
        double p1 = f.w1 * normal_pdf(x, f.mu1, f.sigma1);
        double p2 = f.w2 * normal_pdf(x, f.mu2, f.sigma2);
        mix.xs.push_back(x), mix.ys.push_back(p1 + p2);
        c1.xs.push_back(x), c1.ys.push_back(p1);
        c2.xs.push_back(x), c2.ys.push_back(p2);
      }
      std::vector<SvgSeries> overlays{mix, c1, c2};
      fs::path hist = o.out_dir / ("reward_mixture_" + id + ".svg");
      write_text(hist, svg_histogram(SvgAxes{"Rewards of " + id, "reward", "density", false}, rewards, 40, overlays));
      written.push_back(hist);

      // Normalized maxima of n draws from the fitted mixture against the standard Gumbel.
      const auto n = static_cast<double>(o.gumbel_n);
      if (f.dominant_weight() * n > M_E) {
        GumbelApprox g = gumbel_approx(f, n);
        Rng rng(mix_seed(o.seed, id + "/gumbel"));
        std::normal_distribution<double> z(0.0, 1.0);
        std::vector<double> maxima;
        maxima.reserve(static_cast<std::size_t>(o.gumbel_trials));
        for (int t = 0; t < o.gumbel_trials; ++t) {
          double m = -std::numeric_limits<double>::infinity();
          for (std::int64_t k = 0; k < o.gumbel_n; ++k) {
            bool first = uniform01(rng) < f.w1;
            double r = first ? f.mu1 + f.sigma1 * z(rng) : f.mu2 + f.sigma2 * z(rng);
            m = std::max(m, r);
          }
          maxima.push_back((m - g.a_n) / g.b_n);
        }
        SvgSeries gd{"standard Gumbel", {}, {}};
        for (int i = 0; i <= 200; ++i) {
          double x = -3.0 + 11.0 * i / 200.0;
          gd.xs.push_back(x);
          gd.ys.push_back(std::exp(-(x + std::exp(-x))));
        }
        std::vector<SvgSeries> ov{gd};
        fs::path gp = o.out_dir / ("gumbel_" + id + ".svg");
        write_text(gp, svg_histogram(SvgAxes{"Normalized max of n=" + std::to_string(o.gumbel_n) + " rewards (" + id + ")",
                                             "(max - a_n) / b_n", "density", false},
                                     maxima, 50, ov));
        written.push_back(gp);
      }
    }
    write_text(o.out_dir / "mixture_fits.csv", fits);
    write_text(o.out_dir / "gumbel.csv", gum);
    written.push_back(o.out_dir / "mixture_fits.csv");
    written.push_back(o.out_dir / "gumbel.csv");
  }

  if (o.space) {
    EnumerableSpace space = EnumerableSpace::load(*o.space);
    ToyGenerator gen(space);
    ToyReward rew(space);
    RewardCache cache(rew);
    QAlignConfig qc;
    qc.beta = BetaParam(o.beta);
    qc.steps = o.steps;
    qc.max_len = static_cast<std::int64_t>(space.max_length());
    qc.seed = o.seed;
    const Prompt x{"space", "space", std::nullopt, {}};
    ChainResult chain = qalign_chain(qc, x, gen, cache);
    ExactDistribution exact = exact_distribution(TargetSpec{BetaParam(o.beta)}, x, score_space(space));
    DiagnosticsReport rep = diagnostics(chain, &exact, 0.1, 100);
    std::string csv = "step,tv\n";
    for (const auto& p : rep.tv_curve) csv += std::to_string(p.step) + "," + fmt(p.tv) + "\n";
    write_text(o.out_dir / "tv.csv", csv);
    written.push_back(o.out_dir / "tv.csv");
    std::cerr << "acceptance rate " << fmt(rep.acceptance_rate) << ", final TV " << fmt(*rep.final_tv) << "\n";
  }
  return written;
}

// ---------------------------------------------------------------------------------------------
// replay

bool same_bytes(const fs::path& a, const fs::path& b) {
  if (!fs::exists(a) || !fs::exists(b)) return false;
  return read_text(a) == read_text(b);
}

ReplayResult cmd_replay(const fs::path& run_dir, const fs::path& out_root) {
  json meta = json::parse(read_text(run_dir / "run.json"));
  if (!meta.value("complete", false)) throw Error("run " + run_dir.string() + " is incomplete");
  RunConfig cfg = RunConfig::from_json(meta.at("config"), run_dir);
  cfg.prompts = run_dir / "prompts.jsonl";
  for (BackendSpec* b : {&cfg.generator, &cfg.reward}) {
    if (b->kind == "http") {
      if (!b->record) throw Error("run used a live backend without recording; nothing to replay against");
      b->kind = "fixture";
      b->fixture = run_dir / "fixtures.jsonl";
      b->record = false;
    }
  }
  RunOptions ro;
  ro.runs_root = out_root;
  ReplayResult res;
  if (fs::weakly_canonical(out_root / cfg.run_id) == fs::weakly_canonical(run_dir)) {
    throw Error("replay output must differ from the original run directory");
  }
  if (fs::exists(out_root / cfg.run_id)) fs::remove_all(out_root / cfg.run_id);
  res.replay_dir = cmd_run(cfg, ro);
  for (const auto& p : load_prompts(cfg.prompts, std::nullopt)) {
    for (const char* name : {"chain_0.jsonl", "samples.jsonl", "decisions.jsonl"}) {
      fs::path a = run_dir / p.id / name;
      fs::path b = res.replay_dir / p.id / name;
      if (!fs::exists(a) && !fs::exists(b)) continue;
      if (!same_bytes(a, b)) res.mismatches.push_back((fs::path(p.id) / name).string());
    }
  }
  return res;
}

}  // namespace qalign
