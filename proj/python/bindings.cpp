#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "qalign/backends.hpp"
#include "qalign/decision.hpp"
#include "qalign/diagnostics.hpp"
#include "qalign/extreme_value.hpp"
#include "qalign/harness.hpp"
#include "qalign/mixture.hpp"
#include "qalign/sampler.hpp"
#include "qalign/target.hpp"
#include "qalign/toml_lite.hpp"
#include "qalign/verify.hpp"

namespace py = pybind11;
using namespace qalign;

namespace {

// JSON crosses the boundary as text; the Python side decodes it with json.loads.
std::string space_json(const EnumerableSpace& s) { return s.to_json().dump(); }

py::dict fit_to_dict(const MixtureFit& f) {
  py::dict d;
  d["w1"] = f.w1;
  d["w2"] = f.w2;
  d["mu1"] = f.mu1;
  d["mu2"] = f.mu2;
  d["sigma1"] = f.sigma1;
  d["sigma2"] = f.sigma2;
  d["dominant_index"] = f.dominant_index;
  d["log_likelihood"] = f.log_likelihood;
  d["iterations"] = f.iterations;
  return d;
}

MixtureFit fit_from_dict(const py::dict& d) {
  MixtureFit f;
  f.w1 = d["w1"].cast<double>();
  f.w2 = d["w2"].cast<double>();
  f.mu1 = d["mu1"].cast<double>();
  f.mu2 = d["mu2"].cast<double>();
  f.sigma1 = d["sigma1"].cast<double>();
  f.sigma2 = d["sigma2"].cast<double>();
  f.dominant_index = d["dominant_index"].cast<int>();
  f.validate();
  return f;
}

std::vector<Sequence> to_sequences(const std::vector<std::string>& texts) {
  std::vector<Sequence> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(Sequence::parse(t, UnitKind::word));
  return out;
}

}  // namespace

PYBIND11_MODULE(_qalign, m) {
  m.doc() = "Metropolis-Hastings test-time alignment: sampler, baselines and analysis tools";

  py::register_exception<Error>(m, "QAlignError", PyExc_ValueError);

  m.def("acceptance_probability", &acceptance_probability, py::arg("reward_proposal"), py::arg("reward_current"),
        py::arg("beta"), py::arg("len_proposal"), py::arg("len_current"));

  py::class_<EnumerableSpace>(m, "EnumerableSpace")
      .def_static("from_json_text", [](const std::string& text) { return EnumerableSpace::from_json(nlohmann::json::parse(text)); })
      .def_static("load", &EnumerableSpace::load)
      .def("to_json_text", &space_json)
      .def("support", [](const EnumerableSpace& s) {
        std::vector<std::string> out;
        for (const auto& y : s.enumerate()) out.push_back(y.text());
        return out;
      })
      .def("reward", [](const EnumerableSpace& s, const std::string& text) {
        return s.reward(Sequence::parse(text, UnitKind::backend_token));
      })
      .def("log_prob", [](const EnumerableSpace& s, const std::string& text) {
        return s.log_prob(Sequence::parse(text, UnitKind::backend_token).tokens());
      });

  m.def(
      "exact_target",
      [](const EnumerableSpace& space, double beta) {
        ExactDistribution d = exact_distribution(TargetSpec{BetaParam(beta)}, Prompt{"x", "x", std::nullopt, {}},
                                                 score_space(space));
        std::vector<std::pair<std::string, double>> out;
        for (std::size_t i = 0; i < d.size(); ++i) out.emplace_back(d.support()[i].text(), d.probabilities()[i]);
        return out;
      },
      py::arg("space"), py::arg("beta"), "Exact aligned distribution as (text, probability) pairs");

  m.def(
      "run_chain",
      [](const EnumerableSpace& space, double beta, std::int64_t steps, std::uint64_t seed) {
        ToyGenerator gen(space);
        ToyReward reward(space);
        RewardCache cache(reward);
        QAlignConfig c;
        c.beta = BetaParam(beta);
        c.steps = steps;
        c.max_len = static_cast<std::int64_t>(space.max_length());
        c.seed = seed;
        ChainResult r;
        {
          py::gil_scoped_release release;
          r = qalign_chain(c, Prompt{"x", "x", std::nullopt, {}}, gen, cache);
        }
        py::dict d;
        std::vector<std::string> states;
        for (const auto& s : r.states) states.push_back(s.seq.text());
        d["states"] = states;
        d["acceptance_rate"] = r.acceptance_rate;
        d["generated_tokens"] = r.ledger.generated_tokens;
        return d;
      },
      py::arg("space"), py::arg("beta"), py::arg("steps"), py::arg("seed") = 0,
      "Runs the sampler on an enumerable space and returns its states y^0..y^T");

  m.def(
      "kernel_check",
      [](const EnumerableSpace& space, double beta) {
        KernelCheck k = check_kernel(build_transition_kernel(space, beta));
        py::dict d;
        d["stationarity_l1"] = k.stationarity_l1;
        d["detailed_balance"] = k.detailed_balance;
        d["row_sum_error"] = k.row_sum_error;
        d["min_off_diagonal"] = k.min_off_diagonal;
        d["min_diagonal"] = k.min_diagonal;
        return d;
      },
      py::arg("space"), py::arg("beta"));

  m.def(
      "is_weights", [](const std::vector<double>& r, double beta) { return is_weights(r, beta).values(); },
      py::arg("rewards"), py::arg("beta"));
  m.def(
      "extract_answer",
      [](const std::string& extractor, const std::string& text) {
        return extract_answer(parse_answer_extractor(extractor), text);
      },
      py::arg("extractor"), py::arg("text"));
  m.def(
      "mbr_select",
      [](const std::vector<std::string>& texts, std::optional<std::vector<double>> weights, const std::string& utility,
         const std::string& extractor) {
        std::optional<ISWeights> w;
        if (weights) w = ISWeights(*weights);
        MbrResult r = mbr_select(to_sequences(texts), w, Utility(parse_utility(utility), parse_answer_extractor(extractor)));
        return std::make_pair(r.index, r.expected_utility);
      },
      py::arg("texts"), py::arg("weights") = std::nullopt, py::arg("utility") = "exact_match",
      py::arg("extractor") = "identity", "Returns (index, expected utility)");

  m.def(
      "fit_reward_mixture", [](const std::vector<double>& r) { return fit_to_dict(fit_reward_mixture(r)); },
      py::arg("rewards"));
  m.def(
      "gumbel_approx",
      [](const py::dict& fit, double n) {
        GumbelApprox g = gumbel_approx(fit_from_dict(fit), n);
        return py::make_tuple(g.a_n, g.b_n, g.n_d);
      },
      py::arg("fit"), py::arg("n"), "Returns (a_n, b_n, n_d)");
  m.def(
      "gumbel_approx_normal",
      [](double mu, double sigma, double n) {
        GumbelApprox g = gumbel_approx(mu, sigma, n);
        return py::make_tuple(g.a_n, g.b_n);
      },
      py::arg("mu"), py::arg("sigma"), py::arg("n"));
  m.def(
      "beta_star", [](const py::dict& fit, double n) { return beta_star(fit_from_dict(fit), n); }, py::arg("fit"),
      py::arg("n"));
  m.def(
      "bon_max_density",
      [](const std::vector<double>& values, const std::vector<double>& probs, int n) {
        return bon_max_density(DiscretePmf{values, probs}, n).probs;
      },
      py::arg("values"), py::arg("probs"), py::arg("n"));

  m.def("parse_toml", [](const std::string& text) { return parse_toml(text).dump(); }, py::arg("text"));

  m.def(
      "run",
      [](const std::filesystem::path& config, const std::filesystem::path& runs_root) {
        RunOptions o;
        o.runs_root = runs_root;
        o.config_source = config;
        py::gil_scoped_release release;
        return cmd_run(RunConfig::load(config), o);
      },
      py::arg("config"), py::arg("runs_root") = "runs");
  m.def(
      "curve",
      [](const std::vector<std::filesystem::path>& runs, const std::filesystem::path& out) {
        CurveResult r = cmd_curve(runs, out);
        return py::make_tuple(r.csv, r.svg, r.warnings);
      },
      py::arg("runs"), py::arg("out"));

  m.def(
      "verify",
      [](std::vector<int> only, std::optional<std::string> mutation) {
        VerifyOptions o;
        o.only = std::set<int>(only.begin(), only.end());
        o.mutation = std::move(mutation);
        std::vector<CriterionResult> res;
        {
          py::gil_scoped_release release;
          res = run_verify(o);
        }
        return verify_report_json(res, o.mutation).dump();
      },
      py::arg("only") = std::vector<int>{}, py::arg("mutation") = std::nullopt,
      "Acceptance criteria report as JSON text");
}
