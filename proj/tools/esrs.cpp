#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>
#include <random>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "esrs/esrs.hpp"
#include "esrs/service.hpp"
#include "esrs/simulate.hpp"
#include "esrs/worked_example.hpp"

namespace {

using nlohmann::json;

esrs::Dataset load_with_overrides(const std::string& path) {
  esrs::Dataset d = path.empty() ? esrs::example::five_poi_dataset() : esrs::load_dataset(path);
  esrs::apply_env_override(d.config);
  return d;
}

json relation_json(const esrs::SurmiseRelation& rel) {
  json edges = json::array();
  for (const auto& [a, b] : rel.hasse_edge_ids()) edges.push_back({a, b});
  json order = json::array();
  for (std::size_t a = 0; a < rel.size(); ++a)
    for (std::size_t b = 0; b < rel.size(); ++b)
      if (rel.less(a, b)) order.push_back({rel.id(a), rel.id(b)});
  return {{"items", rel.items()}, {"hasse_edges", edges}, {"strict_order", order}};
}

httplib::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exploration-space recommender"};
  app.require_subcommand(1);

  auto* trace = app.add_subcommand("trace-example", "Walk the five-POI example and print every table");

  std::string traj_path, items_dataset, review_in, flags_out;
  esrs::InferenceConfig icfg;
  auto* infer = app.add_subcommand("infer-surmise", "Infer the surmise relation from trajectories");
  infer->add_option("trajectories", traj_path, "Trajectory JSONL")->required();
  infer->add_option("--dataset", items_dataset, "Dataset whose POIs form the item universe");
  infer->add_option("--review", review_in, "Review file with reviewer decisions");
  infer->add_option("--flags-out", flags_out, "Write edges awaiting review here");
  infer->add_option("--min-support", icfg.min_support);
  infer->add_option("--tau-c", icfg.tau_c);
  infer->add_option("--alpha", icfg.alpha);
  infer->add_option("--tau-high", icfg.tau_high);

  std::string session_file, dataset_path, mode = "path";
  std::optional<std::size_t> k;
  auto* rec = app.add_subcommand("recommend", "Recommend for a stored session");
  rec->add_option("--session-file", session_file, "Session JSON")->required();
  rec->add_option("--mode", mode, "path or rank")->check(CLI::IsMember({"path", "rank"}));
  rec->add_option("--k", k, "Horizon / list length");
  rec->add_option("--dataset", dataset_path, "Dataset JSON (default: bundled five-POI)");

  std::string responses_path;
  std::size_t max_iters = 200;
  double tol = 1e-6;
  auto* em = app.add_subcommand("em-fit", "Fit BLIM rates and the state prior by EM");
  em->add_option("responses", responses_path, "Response JSONL")->required();
  em->add_option("--dataset", dataset_path);
  em->add_option("--max-iters", max_iters);
  em->add_option("--tol", tol);

  std::uint64_t seed = 42;
  esrs::SimulationOptions sopt;
  auto* sim = app.add_subcommand("simulate", "Scripted users over a dataset");
  sim->add_option("--seed", seed);
  sim->add_option("--dataset", dataset_path);
  sim->add_option("--sessions", sopt.sessions);
  sim->add_option("--steps", sopt.steps);

  int port = 8080;
  std::string host = "0.0.0.0", snapshot, audit_log;
  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  serve->add_option("--port", port);
  serve->add_option("--host", host);
  serve->add_option("--dataset", dataset_path);
  serve->add_option("--snapshot", snapshot, "Session snapshot file (loaded at start, written at shutdown)");
  serve->add_option("--audit-log", audit_log, "Append feedback audit records here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*trace) {
      esrs::example::print(std::cout, esrs::example::run());
      return 0;
    }

    if (*infer) {
      auto batch = esrs::ingest_trajectories(traj_path);
      for (const auto& r : batch.rejected)
        std::cerr << "line " << r.line << " rejected (" << esrs::to_string(r.code) << "): " << r.message << "\n";
      std::vector<esrs::PoiId> items;
      if (!items_dataset.empty()) items = esrs::load_dataset(items_dataset).relation->items();
      esrs::ReviewDecisions review;
      if (!review_in.empty()) review = esrs::load_review_file(review_in);
      const auto res = esrs::infer_surmise(batch.trajectories, icfg, items, review);
      if (!flags_out.empty()) esrs::save_review_file(flags_out, res.flags);
      json out = relation_json(res.relation);
      out["candidates"] = json::array();
      for (const auto& e : res.candidates) out["candidates"].push_back(esrs::to_json(e));
      out["rejected_lines"] = batch.rejected.size();
      std::cout << out.dump(2) << "\n";
      return 0;
    }

    if (*rec) {
      const auto d = load_with_overrides(dataset_path);
      auto s = esrs::session_from_json(d, esrs::read_json_file(session_file));
      auto opt = esrs::RecommendOptions::from_config(d.config);
      opt.mode = esrs::parse_mode(mode);
      if (k) opt.k_max = *k;
      const auto r = esrs::recommend(s, d, {}, opt);
      std::cout << esrs::recommendation_to_json(d, r).dump(2) << "\n";
      return 0;
    }

    if (*em) {
      const auto d = load_with_overrides(dataset_path);
      const auto records = esrs::load_responses(responses_path);
      std::vector<esrs::ResponseVector> seqs;
      for (const auto& r : records) seqs.push_back(esrs::ResponseVector::from_ids(*d.relation, r.responses));
      auto init = esrs::BlimParams::uniform(d.size(), 0.1, 0.1);
      esrs::EmOptions eo;
      eo.max_iters = max_iters;
      eo.tol = tol;
      eo.enumeration_limit = d.config.enumeration_limit;
      const auto res = esrs::em_fit(seqs, d.relation, init, esrs::initial_prior(d.relation, d.config.enumeration_limit,
                                                                                d.config.beam), eo);
      json params = json::object();
      for (std::size_t i = 0; i < d.size(); ++i)
        params[d.relation->id(i)] = {{"beta", res.params.beta[i]}, {"eta", res.params.eta[i]}};
      json clamps = json::array();
      for (const auto& c : res.clamps)
        clamps.push_back({{"iteration", c.iteration}, {"item", d.relation->id(c.item)},
                          {"parameter", c.parameter == 'b' ? "beta" : "eta"}, {"raw", c.raw}, {"clamped", c.clamped}});
      std::cout << json{{"iterations", res.iterations}, {"converged", res.converged}, {"log_likelihood", res.trace},
                        {"params", params}, {"prior_top", esrs::distribution_to_json(*d.relation, res.prior, 10)},
                        {"clamps", clamps}}
                       .dump(2)
                << "\n";
      return 0;
    }

    if (*sim) {
      sopt.seed = seed;
      esrs::Engine engine(load_with_overrides(dataset_path));
      const auto report = esrs::simulate(engine, sopt, &std::cout);
      std::cout << report.to_json().dump() << "\n";
      return report.ok() ? 0 : 1;
    }

    if (*serve) {
      esrs::Engine engine(load_with_overrides(dataset_path));
      if (!snapshot.empty() && std::ifstream(snapshot)) engine.load_snapshot(snapshot);
      if (!audit_log.empty()) engine.set_audit_log(audit_log);
      httplib::Server srv;
      esrs::install_routes(srv, engine);
      g_server = &srv;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "listening on " << host << ":" << port << "\n";
      if (!srv.listen(host, port)) {
        std::cerr << "cannot bind " << host << ":" << port << "\n";
        return 1;
      }
      if (!snapshot.empty()) engine.save_snapshot(snapshot);
      return 0;
    }
  } catch (const esrs::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
