#pragma once

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <json.hpp>

#include "ohm/config.hpp"
#include "ohm/experiment.hpp"
#include "ohm/io.hpp"

namespace ohm {

inline constexpr const char* kArtifactVersion = "0.1.0";

namespace detail {

inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

inline std::string join_direction(const Vec& d) {
  std::string out;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (i) out += ';';
    out += fmt_double(d[i]);
  }
  return out;
}

inline void write_metadata(const RunConfig& run) {
  nlohmann::json meta;
  meta["artifact"] = "ohm";
  meta["version"] = kArtifactVersion;
  meta["command"] = run.command;
  meta["config_hash"] = hash_hex(run.config_hash);
  std::vector<std::uint64_t> seeds = run.sweep.sampling.seeds;
  meta["seeds"] = seeds;
  write_text_file(std::filesystem::path(run.output.dir) / "metadata.json", meta.dump(2) + "\n");
}

inline nlohmann::json report_json(const ConductivityReport& rep, const PotentialSolution& sol) {
  nlohmann::json j;
  j["ell"] = rep.ell;
  j["sigma_flux"] = rep.sigma_flux;
  j["sigma_energy"] = rep.sigma_energy;
  j["rescaled"] = rep.rescaled;
  j["iterations"] = sol.iterations;
  j["residual"] = sol.residual;
  nlohmann::json profile = nlohmann::json::array();
  for (const auto& [gamma, flux] : rep.flux_profile) profile.push_back({gamma, flux});
  j["flux_profile"] = profile;
  return j;
}

inline nlohmann::json effective_json(const EffectiveMatrix& em) {
  nlohmann::json j;
  j["dim"] = em.dim;
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < em.dim; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int k = 0; k < em.dim; ++k) row.push_back(em.matrix(i, k));
    rows.push_back(row);
  }
  j["matrix"] = rows;
  j["eigenvalues"] = em.eigenvalues;
  nlohmann::json vecs = nlohmann::json::array();
  for (int k = 0; k < em.dim; ++k) {
    nlohmann::json col = nlohmann::json::array();
    for (int i = 0; i < em.dim; ++i) col.push_back(em.eigenvectors(i, k));
    vecs.push_back(col);
  }
  j["eigenvectors"] = vecs;
  j["intensity"] = em.intensity;
  j["kernel_dim"] = em.kernel_dim;
  j["flux_discrepancy"] = em.flux_discrepancy;
  j["component_restricted"] = em.component_restricted;
  nlohmann::json energies = nlohmann::json::array();
  for (const auto& e : em.seed_energies) energies.push_back(e);
  j["seed_energies"] = energies;
  return j;
}

inline std::string sweep_csv(const SweepResult& res) {
  std::string out =
      "model,d,direction,ell,seed,sigma_flux,sigma_energy,rescaled,iterations,residual,crossing_bound\n";
  const std::string dir = join_direction(res.direction);
  for (const auto& c : res.cells) {
    out += res.model.name + "," + std::to_string(res.model.dim) + "," + dir + "," +
           fmt_double(c.ell) + "," + std::to_string(c.seed) + ",";
    if (c.ok) {
      out += fmt_double(c.report.sigma_flux) + "," + fmt_double(c.report.sigma_energy) + "," +
             fmt_double(c.report.rescaled) + "," + std::to_string(c.iterations) + "," +
             fmt_double_sci(c.residual) + "," + fmt_double(c.crossing_bound);
    } else {
      out += "nan,nan,nan,0,nan,nan";
    }
    out += "\n";
  }
  return out;
}

inline std::string sweep_summary_csv(const SweepResult& res) {
  std::string out = "ell,n_ok,n_failed,mean_rescaled,stderr_rescaled,predicted_limit,rel_gap\n";
  for (const auto& s : res.per_ell) {
    const double gap = res.has_prediction && s.n_ok > 0
                           ? std::abs(s.mean_rescaled - res.predicted_limit) /
                                 std::max(std::abs(res.predicted_limit), 1e-12)
                           : std::numeric_limits<double>::quiet_NaN();
    out += fmt_double(s.ell) + "," + std::to_string(s.n_ok) + "," + std::to_string(s.n_failed) +
           "," + fmt_double(s.mean_rescaled) + "," + fmt_double(s.stderr_rescaled) + "," +
           (res.has_prediction ? fmt_double(res.predicted_limit) : "nan") + "," + fmt_double(gap) +
           "\n";
  }
  return out;
}

}  // namespace detail

// Dispatches a validated run configuration, writes outputs under output.dir,
// prints a one-line summary. Throws ohm::Error subclasses on failure.
inline int run_command(const RunConfig& run) {
  namespace fs = std::filesystem;
  fs::create_directories(run.output.dir);
  const fs::path dir(run.output.dir);
  detail::write_metadata(run);

  if (run.command == "solve") {
    SweepConfig cfg = run.sweep;
    const double ell = cfg.ells.front();
    const std::uint64_t seed = cfg.sampling.seeds.front();
    const bool has_prediction = !std::holds_alternative<ExplicitEdges>(cfg.model.model);
    DirectionGeometry geom;
    if (has_prediction) {
      EffectiveMatrix em = assemble_effective_matrix(cfg.model.model, cfg.model.dim,
                                                     cfg.sampling.torus_n, cfg.sampling.seeds,
                                                     cfg.model.intensity, cfg.solver.tol,
                                                     cfg.solver.max_iter);
      geom = observation_geometry(em, cfg.direction);
    } else {
      geom.frame = DirectionFrame::box_stripe(cfg.model.dim, complete_rotation(cfg.direction));
      geom.predicted_limit = std::numeric_limits<double>::quiet_NaN();
    }
    detail::SolvedInstance inst = detail::solve_instance(cfg, geom.frame, ell, seed);
    ConductivityReport rep = conductivity_report(inst.net, inst.sol, cfg.solver.n_gamma);
    nlohmann::json j = detail::report_json(rep, inst.sol);
    j["predicted_limit"] = geom.predicted_limit;
    write_text_file(dir / "report.json", j.dump(2) + "\n");
    if (run.output.dump_network) write_text_file(dir / "network.txt", dump_network(inst.net));
    if (run.output.dump_solution) write_text_file(dir / "solution.txt", dump_solution(inst.sol));
    std::cout << "solve: ell=" << fmt_double(ell) << " rescaled=" << fmt_double(rep.rescaled)
              << " predicted=" << fmt_double(geom.predicted_limit)
              << " residual=" << fmt_double_sci(inst.sol.residual) << "\n";
    return 0;
  }

  if (run.command == "sweep") {
    SweepResult res = scaling_sweep(run.sweep);
    write_text_file(dir / "sweep.csv", detail::sweep_csv(res));
    write_text_file(dir / "sweep_summary.csv", detail::sweep_summary_csv(res));
    if (res.effective)
      write_text_file(dir / "effective_matrix.json", detail::effective_json(*res.effective).dump(2) + "\n");
    const auto& last = res.per_ell.back();
    std::cout << "sweep: ell=" << fmt_double(last.ell)
              << " observed=" << fmt_double(last.mean_rescaled)
              << " predicted=" << (res.has_prediction ? fmt_double(res.predicted_limit) : "n/a")
              << " gap=" << (res.has_prediction ? fmt_double(res.last_gap) : "n/a") << "\n";
    return 0;
  }

  if (run.command == "corrector") {
    const SweepConfig& cfg = run.sweep;
    EffectiveMatrix em = assemble_effective_matrix(cfg.model.model, cfg.model.dim,
                                                   cfg.sampling.torus_n, cfg.sampling.seeds,
                                                   cfg.model.intensity, cfg.solver.tol,
                                                   cfg.solver.max_iter);
    write_text_file(dir / "effective_matrix.json", detail::effective_json(em).dump(2) + "\n");
    if (run.output.dump_solution) {
      TorusGraph g = build_torus_graph(cfg.model.model, cfg.model.dim, cfg.sampling.torus_n,
                                       cfg.sampling.seeds.front(), cfg.model.intensity);
      Vec e1(cfg.model.dim, 0.0);
      e1[0] = 1.0;
      CorrectorSolution c = solve_corrector(g, e1, cfg.solver.tol, cfg.solver.max_iter);
      std::string out;
      for (std::size_t v = 0; v < c.corrector.size(); ++v)
        out += std::to_string(v) + " " + fmt_double(c.corrector[v]) + "\n";
      write_text_file(dir / "corrector.txt", out);
    }
    std::cout << "corrector: m=" << fmt_double(em.intensity)
              << " D11=" << fmt_double(em.matrix(0, 0))
              << " m*D11=" << fmt_double(em.intensity * em.matrix(0, 0)) << "\n";
    return 0;
  }

  if (run.command == "direction") {
    const SweepConfig& cfg = run.sweep;
    EffectiveMatrix em = assemble_effective_matrix(cfg.model.model, cfg.model.dim,
                                                   cfg.sampling.torus_n, cfg.sampling.seeds,
                                                   cfg.model.intensity, cfg.solver.tol,
                                                   cfg.solver.max_iter);
    DirectionGeometry geom = direction_geometry(em, cfg.direction);
    nlohmann::json j;
    j["effective_matrix"] = detail::effective_json(em);
    j["w"] = geom.w;
    j["a"] = geom.a;
    j["a_dot_Da"] = geom.a_dot_Da;
    j["predicted_limit"] = geom.predicted_limit;
    j["tilted"] = geom.frame.is_tilted();
    nlohmann::json rot = nlohmann::json::array();
    for (int i = 0; i < em.dim; ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (int k = 0; k < em.dim; ++k) row.push_back(geom.frame.rotation()(i, k));
      rot.push_back(row);
    }
    j["rotation"] = rot;
    write_text_file(dir / "direction.json", j.dump(2) + "\n");
    std::cout << "direction: a.Da=" << fmt_double(geom.a_dot_Da)
              << " predicted=" << fmt_double(geom.predicted_limit)
              << (geom.frame.is_tilted() ? " (tilted cell)" : " (box cell)") << "\n";
    return 0;
  }

  if (run.command == "weakprobe") {
    WeakConvergenceProbe probe = weak_convergence_probe(run.sweep);
    std::string out = "ell,phi_index,pairing\n";
    for (std::size_t le = 0; le < probe.ells.size(); ++le)
      for (int p = 0; p < probe.n_phi; ++p)
        out += fmt_double(probe.ells[le]) + "," + std::to_string(p) + "," +
               fmt_double(probe.pairings[le * probe.n_phi + p]) + "\n";
    write_text_file(dir / "weakprobe.csv", out);
    double last_max = 0.0;
    for (int p = 0; p < probe.n_phi; ++p)
      last_max = std::max(last_max,
                          std::abs(probe.pairings[(probe.ells.size() - 1) * probe.n_phi + p]));
    std::cout << "weakprobe: ell=" << fmt_double(probe.ells.back())
              << " max|pairing|=" << fmt_double(last_max) << "\n";
    return 0;
  }

  if (run.command == "mott") {
    const auto rows = mott_sweep(run.betas, run.sweep);
    std::string out = "beta,mott_scale,d11,log_d11\n";
    for (const auto& r : rows)
      out += fmt_double(r.beta) + "," + fmt_double(r.mott_scale) + "," + fmt_double(r.d11) + "," +
             fmt_double(r.log_d11) + "\n";
    write_text_file(dir / "mott.csv", out);
    bool monotone = true;
    for (std::size_t i = 1; i < rows.size(); ++i) monotone &= rows[i].d11 < rows[i - 1].d11;
    std::cout << "mott: betas=" << rows.size() << " D11 " << (monotone ? "strictly decreasing" : "NOT monotone")
              << " last=" << fmt_double(rows.back().d11) << "\n";
    return 0;
  }

  throw ConfigError("validation error: unknown command '" + run.command + "'");
}

}  // namespace ohm
