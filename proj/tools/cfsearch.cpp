// cfsearch: dataset generation, GCN training, guided cascade search,
// relevance explanations and classifier evaluation.

#include <cstring>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cfsearch/cfsearch.hpp"

namespace fs = std::filesystem;
using namespace cfsearch;

namespace {

enum ExitCode { kOk = 0, kValidation = 2, kInfeasible = 3, kIo = 4 };

struct Config {
  std::string case_path;
  std::string out = ".";
  std::uint64_t seed = 1;
  double beta = kDefaultRelayThreshold;
  int R = 2;
  bool sequential_relays = false;

  // load draw
  double band_lo = 0.9, band_hi = 1.1, scale = 1.1;
  std::uint64_t scenario = 0;

  // generate
  int scenarios = 100;
  int jobs = 1;

  // train / eval
  std::string dataset;
  std::string model;
  gcn::Hyper hyper;

  // search
  std::vector<std::string> strategies{"RAND", "PFW", "LODF", "GCN"};
  std::size_t budget = std::numeric_limits<std::size_t>::max();
  bool no_cache = false;

  // explain
  int branch = -1;
  std::vector<int> outages;
  std::size_t top = 10;
};

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

CascadeOptions cascade_options(const Config& c) {
  CascadeOptions o;
  o.beta = c.beta;
  o.relay_mode = c.sequential_relays ? RelayMode::SequentialWorstFirst : RelayMode::Simultaneous;
  return o;
}

DatasetOptions dataset_options(const Config& c) {
  DatasetOptions d;
  d.scenarios = c.scenarios;
  d.max_random_outages = c.R;
  d.band_lo = c.band_lo;
  d.band_hi = c.band_hi;
  d.global_scale = c.scale;
  d.seed = c.seed;
  d.cascade = cascade_options(c);
  d.jobs = c.jobs;
  return d;
}

// Loads of the search/explain operating point. Drawn from the seed with a
// counter disjoint from training scenarios.
std::vector<double> operating_loads(const Network& net, const Config& c) {
  constexpr std::uint64_t kOperatingCounterBase = 1ull << 40;
  return scenario_loads(net, dataset_options(c), kOperatingCounterBase + c.scenario);
}

std::string format_double(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

int cmd_generate(const Config& c) {
  const Network net = load_case(c.case_path);
  if (c.scenarios < 0) throw ValidationError("--scenarios must be >= 0");
  // The intact case must be servable at nominal scale.
  dcopf_initial(net, net.base_loads());
  const auto ds = generate_dataset(net, dataset_options(c));
  ensure_dir(c.out);
  write_text_file(join(c.out, "dataset.jsonl"), dataset_to_jsonl(ds.samples));
  write_text_file(join(c.out, "dataset.meta.json"), metadata_to_json(ds.meta).dump(2) + "\n");
  std::cout << "samples " << ds.meta.samples << ", skipped scenarios " << ds.meta.skipped << ", positive rate "
            << ds.meta.positive_rate << "\n";
  return kOk;
}

int cmd_train(const Config& c) {
  const Network net = load_case(c.case_path);
  const auto graph = gcn::build_line_graph(net);
  const std::string dataset = c.dataset.empty() ? join(c.out, "dataset.jsonl") : c.dataset;
  const auto samples = gcn::parse_dataset(read_text_file(dataset));
  for (const auto& s : samples)
    if (s.graph_hash != graph.signature)
      throw ValidationError("dataset graph hash " + gcn::hash_to_hex(s.graph_hash) + " does not match the case (" +
                            gcn::hash_to_hex(graph.signature) + ")");
  const auto model = gcn::train(samples, graph, c.hyper);
  ensure_dir(c.out);
  write_text_file(join(c.out, "model.json"), gcn::serialize_model(model));
  std::string trace = "epoch,loss\n";
  for (std::size_t e = 0; e < model.loss_trace.size(); ++e) trace += std::to_string(e + 1) + "," + format_double(model.loss_trace[e]) + "\n";
  write_text_file(join(c.out, "loss_trace.csv"), trace);
  std::cout << "parameters " << gcn::parameter_count(model.params) << ", epochs " << model.loss_trace.size();
  if (!model.loss_trace.empty()) std::cout << ", final loss " << model.loss_trace.back();
  std::cout << "\n";
  return kOk;
}

gcn::Model load_model(const Config& c) {
  return gcn::parse_model(read_text_file(c.model.empty() ? join(c.out, "model.json") : c.model));
}

// Exhaustive reference keyed by everything that determines it.
std::uint64_t reference_key(const Network& net, const std::vector<double>& loads, const Config& c) {
  Fnv1a h;
  for (char ch : serialize_case(net)) h.add(static_cast<unsigned char>(ch));
  for (double l : loads) {
    std::uint64_t bits;
    std::memcpy(&bits, &l, sizeof bits);
    h.add(bits);
  }
  std::uint64_t beta_bits;
  std::memcpy(&beta_bits, &c.beta, sizeof beta_bits);
  h.add(beta_bits);
  h.add(static_cast<std::uint64_t>(c.R));
  h.add(c.sequential_relays ? 1 : 0);
  return h.value();
}

using PathSet = std::set<std::vector<int>>;

PathSet shedding_set(const std::vector<CascadePath>& paths) {
  PathSet s;
  for (const auto& p : paths)
    if (p.sheds()) s.insert(p.random_outages);
  return s;
}

// Returns the exhaustive shedding-path set, from the cache when present.
PathSet exhaustive_reference(const Network& net, const OperatingState& root, const std::vector<double>& loads,
                             const Config& c, std::size_t& tree_size) {
  const std::string key = gcn::hash_to_hex(reference_key(net, loads, c));
  const std::string path = join(c.out, "exhaustive_" + key + ".json");
  if (!c.no_cache && fs::exists(path)) {
    try {
      const Json doc = Json::parse(read_text_file(path));
      if (doc.at("key").get<std::string>() == key) {
        tree_size = doc.at("attempts").get<std::size_t>();
        PathSet s;
        for (const auto& seq : doc.at("shedding_paths")) s.insert(seq.get<std::vector<int>>());
        return s;
      }
    } catch (const Json::exception&) {
      // stale or corrupt cache: recompute
    }
  }
  SearchOptions opt;
  opt.max_random_outages = c.R;
  opt.cascade = cascade_options(c);
  const auto ex = exhaustive_search(net, root, opt);
  tree_size = ex.result.attempts;
  const PathSet s = shedding_set(ex.result.paths);
  Json doc = {{"key", key}, {"attempts", tree_size}, {"shedding_paths", Json::array()}};
  for (const auto& seq : s) doc["shedding_paths"].push_back(seq);
  write_text_file(path, doc.dump() + "\n");
  write_text_file(join(c.out, "curve_EXHAUSTIVE.csv"), ex.curve.to_csv());
  return s;
}

int cmd_search(const Config& c) {
  if (c.budget < 1) throw ValidationError("--budget must be >= 1");
  const Network net = load_case(c.case_path);
  std::vector<StrategyKind> kinds;
  for (const auto& s : c.strategies) kinds.push_back(strategy_from_string(s));
  std::optional<GcnGuide> guide;
  if (std::find(kinds.begin(), kinds.end(), StrategyKind::Gcn) != kinds.end()) {
    if (c.model.empty() && !fs::exists(join(c.out, "model.json")))
      throw ValidationError("GCN strategy requires --model");
    guide.emplace(load_model(c), gcn::build_line_graph(net));
  }
  ensure_dir(c.out);
  const auto loads = operating_loads(net, c);
  const OperatingState root = initial_state(net, loads);

  std::size_t tree_size = 0;
  const PathSet reference = exhaustive_reference(net, root, loads, c, tree_size);

  SearchOptions opt;
  opt.max_random_outages = c.R;
  opt.budget = c.budget;
  opt.cascade = cascade_options(c);
  std::string summary = "strategy,attempts,found,total_paths,attempts_to_find_all\n";
  std::cout << "total shedding paths " << reference.size() << " (tree size " << tree_size << ")\n";
  for (auto kind : kinds) {
    SearchStrategy st;
    st.kind = kind;
    st.seed = derive_seed(c.seed, 0xA5);
    st.guide = guide ? &*guide : nullptr;
    auto outcome = online_search(net, root, st, opt);
    outcome.curve.total_paths = reference.size();
    const std::string name = to_string(kind);
    write_text_file(join(c.out, "paths_" + name + ".jsonl"), paths_to_jsonl(outcome.shedding_paths()));
    write_text_file(join(c.out, "curve_" + name + ".csv"), outcome.curve.to_csv());
    const auto all = outcome.curve.attempts_to_reach(reference.size());
    const std::string all_text = all ? std::to_string(*all) : "NA";
    summary += name + "," + std::to_string(outcome.result.attempts) + "," + std::to_string(outcome.curve.found()) +
               "," + std::to_string(reference.size()) + "," + all_text + "\n";
    std::cout << name << ": attempts " << outcome.result.attempts << ", found " << outcome.curve.found()
              << ", attempts to find all " << all_text << "\n";
  }
  write_text_file(join(c.out, "summary.csv"), summary);
  return kOk;
}

int cmd_explain(const Config& c) {
  const Network net = load_case(c.case_path);
  const GcnGuide guide(load_model(c), gcn::build_line_graph(net));
  OperatingState state = initial_state(net, operating_loads(net, c));
  for (int k : c.outages) {
    if (k < 0 || k >= net.branch_count()) throw ValidationError("--outages: branch " + std::to_string(k) + " out of range");
    state = propagate(net, state, k, cascade_options(c)).state;
  }
  if (c.branch < 0 || c.branch >= net.branch_count()) throw ValidationError("--branch out of range");
  if (!state.in_service[c.branch]) throw ValidationError("branch " + std::to_string(c.branch) + " is out of service");
  const auto rep = lrp::explain(guide.model, guide.basis, gcn::extract_features(net, state, c.beta), c.branch);
  const auto audit = lrp::conservation_audit(rep);
  Json doc = lrp::report_to_json(rep, c.top);
  doc["outages"] = c.outages;
  doc["audit"] = {{"max_discrepancy", audit.max_discrepancy}, {"exact", audit.exact}, {"non_increasing", audit.non_increasing}};
  ensure_dir(c.out);
  const std::string stem = "explain_" + std::to_string(c.branch);
  write_text_file(join(c.out, stem + ".json"), doc.dump(2) + "\n");
  write_text_file(join(c.out, stem + ".csv"), lrp::report_to_csv(rep));
  std::cout << "target " << rep.target_value << (rep.negative_target ? " (NEGATIVE_TARGET)" : "") << "\n";
  for (int f = 0; f < gcn::kFeatureCount; ++f) std::cout << gcn::kFeatureNames[f] << " " << rep.grouped[f] << "\n";
  return kOk;
}

int cmd_eval(const Config& c) {
  const Network net = load_case(c.case_path);
  const GcnGuide guide(load_model(c), gcn::build_line_graph(net));
  const auto samples = gcn::parse_dataset(read_text_file(c.dataset.empty() ? join(c.out, "dataset.jsonl") : c.dataset));
  const auto cm = evaluate(guide.model, guide.basis, samples);
  const auto m = gcn::metrics(cm);
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  long long positives = cm.c + cm.d;
  Json doc = {{"a", cm.a},
              {"b", cm.b},
              {"c", cm.c},
              {"d", cm.d},
              {"total_accuracy", opt(m.total_accuracy)},
              {"hit_rate", opt(m.hit_rate)},
              {"cover_rate", opt(m.cover_rate)},
              {"positive_rate", cm.total() ? Json(static_cast<double>(positives) / static_cast<double>(cm.total())) : Json(nullptr)}};
  ensure_dir(c.out);
  write_text_file(join(c.out, "metrics.json"), doc.dump(2) + "\n");
  std::cout << doc.dump(2) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  Config c;
  CLI::App app{"Cascading-failure search guided by a graph convolutional network"};
  app.require_subcommand(1);

  auto common = [&](CLI::App* sub) {
    sub->add_option("--case", c.case_path, "case JSON file")->required();
    sub->add_option("--out", c.out, "output directory");
    sub->add_option("--seed", c.seed, "root seed");
    sub->add_option("--beta", c.beta, "relay threshold (multiple of the flow limit)")->check(CLI::PositiveNumber);
    sub->add_flag("--sequential-relays", c.sequential_relays, "trip the worst overload first instead of all at once");
  };
  auto loads = [&](CLI::App* sub) {
    sub->add_option("--band-lo", c.band_lo, "lower per-bus load factor");
    sub->add_option("--band-hi", c.band_hi, "upper per-bus load factor");
    sub->add_option("--scale", c.scale, "global load scale");
  };
  auto hyper = [&](CLI::App* sub) {
    sub->add_option("--epochs", c.hyper.epochs, "training epochs");
    sub->add_option("--lr", c.hyper.learning_rate, "Adam learning rate");
    sub->add_option("--k-hops", c.hyper.hops, "polynomial order K of each convolution")->check(CLI::NonNegativeNumber);
    sub->add_option("--f1", c.hyper.filters1, "filters in the first convolution")->check(CLI::PositiveNumber);
    sub->add_option("--f2", c.hyper.filters2, "filters in the second convolution")->check(CLI::PositiveNumber);
    sub->add_option("--w-ratio", c.hyper.weight_ratio, "shed/normal class weight ratio")->check(CLI::PositiveNumber);
    sub->add_option("--batch", c.hyper.batch_size, "samples per minibatch")->check(CLI::PositiveNumber);
  };

  auto* gen = app.add_subcommand("generate", "generate a labelled dataset");
  common(gen);
  loads(gen);
  gen->add_option("--scenarios", c.scenarios, "number of load profiles");
  gen->add_option("--R", c.R, "random outages per path");
  gen->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);

  auto* train = app.add_subcommand("train", "train the GCN");
  common(train);
  hyper(train);
  train->add_option("--dataset", c.dataset, "dataset JSONL (default <out>/dataset.jsonl)");

  auto* search = app.add_subcommand("search", "run the online search for each strategy");
  common(search);
  loads(search);
  search->add_option("--R", c.R, "random outages per path")->check(CLI::PositiveNumber);
  search->add_option("--strategies", c.strategies, "RAND, PFW, LODF, GCN")->delimiter(',');
  search->add_option("--budget", c.budget, "maximum attempts per strategy");
  search->add_option("--model", c.model, "model JSON (default <out>/model.json)");
  search->add_option("--scenario", c.scenario, "operating point index");
  search->add_flag("--no-cache", c.no_cache, "recompute the exhaustive reference");

  auto* explain = app.add_subcommand("explain", "relevance report for one branch");
  common(explain);
  loads(explain);
  explain->add_option("--model", c.model, "model JSON (default <out>/model.json)");
  explain->add_option("--branch", c.branch, "target branch id")->required();
  explain->add_option("--outages", c.outages, "branches disconnected before the explanation")->delimiter(',');
  explain->add_option("--scenario", c.scenario, "operating point index");
  explain->add_option("--top", c.top, "number of top inputs listed");

  auto* eval = app.add_subcommand("eval", "confusion metrics of a model on a dataset");
  common(eval);
  eval->add_option("--model", c.model, "model JSON (default <out>/model.json)");
  eval->add_option("--dataset", c.dataset, "dataset JSONL (default <out>/dataset.jsonl)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kValidation;
  }

  try {
    if (*gen) return cmd_generate(c);
    if (*train) return cmd_train(c);
    if (*search) return cmd_search(c);
    if (*explain) return cmd_explain(c);
    if (*eval) return cmd_eval(c);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const InfeasibleError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInfeasible;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  }
  return kValidation;
}
