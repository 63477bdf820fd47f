#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spatialident/io.hpp"

namespace si = spatialident;
using si::json;

namespace {

si::ModelSpec load_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw si::DomainError("cannot open " + path);
    json j;
    in >> j;
    return si::model_spec_from_json(j);
}

void emit(const json& j, const std::string& out_path) {
    const std::string text = j.dump(2) + "\n";
    if (out_path.empty())
        std::cout << text;
    else
        si::atomic_write(out_path, text);
}

void print_report_table(const si::IdentifiabilityReport& rep) {
    std::cerr << "theorem: " << si::to_string(rep.theorem) << "\n";
    for (const auto& c : rep.conditions)
        std::cerr << "  [" << (c.pass ? "pass" : "FAIL") << "] " << c.name << ": required "
                  << c.required << "; measured " << c.measured << "\n";
    std::cerr << "verdict: " << si::to_string(rep.verdict);
    if (!rep.construction.empty()) std::cerr << " (construction: " << rep.construction << ")";
    std::cerr << "\n";
    if (!rep.note.empty()) std::cerr << "note: " << rep.note << "\n";
}

std::vector<double> parse_grid(const std::string& text) {
    double lo = 0.0, hi = 0.0;
    int steps = 0;
    if (std::sscanf(text.c_str(), "%lf:%lf:%d", &lo, &hi, &steps) != 3 || steps < 1)
        throw si::DomainError("grid must be lo:hi:steps with steps >= 1");
    std::vector<double> grid;
    for (int i = 0; i < steps; ++i)
        grid.push_back(steps == 1 ? lo : lo + (hi - lo) * i / (steps - 1));
    return grid;
}

struct DemoGraph {
    std::string label;
    std::string description;
    si::ProximityMatrix graph;
};

std::vector<DemoGraph> demo_graphs() {
    si::Matrix c = si::Matrix::Zero(6, 6);
    for (const auto& [i, j] : std::vector<std::pair<int, int>>{{0, 1}, {2, 3}, {3, 4}, {4, 2}, {2, 5}}) {
        c(i, j) = 1.0;
        c(j, i) = 1.0;
    }
    return {{"a", "three disjoint edges", si::disjoint_edges_graph(3)},
            {"b", "fully connected, n=6", si::complete_graph(6)},
            {"c", "edge plus triangle with pendant", si::make_proximity(c)},
            {"d", "ring, n=6", si::ring_graph(6)}};
}

int run(int argc, char** argv) {
    CLI::App app{"identifiability toolkit for spatially confounded regression"};
    app.require_subcommand(1);

    std::string model_path, graph_path, out_path, construction, data_dir, grid_text;
    double tol_eig = 1e-8, tol_param = 1e-8;
    std::uint64_t seed = 1;
    int replicates = 100, starts = 8;
    bool known_smoothness = false;
    std::optional<double> delta, bval, beta_alt;
    int zeta = 0;

    auto add_common = [&](CLI::App* cmd, bool needs_graph = true) {
        cmd->add_option("--model", model_path, "model spec JSON")->required();
        if (needs_graph)
            cmd->add_option("--graph", graph_path, "proximity/distance matrix (CSV or edge list)")
                ->required();
        cmd->add_option("--out", out_path, "output file (default: stdout)");
    };

    auto* check = app.add_subcommand("check", "evaluate identifiability theorem hypotheses");
    add_common(check);
    check->add_option("--tol-eig", tol_eig, "eigenvalue distinctness tolerance");
    check->add_option("--tol-param", tol_param, "parameter distinctness tolerance");
    check->add_flag("--known-smoothness", known_smoothness,
                    "treat Matern smoothness as known (exact theorem path)");

    auto* forge = app.add_subcommand("forge", "emit a non-identifiability certificate");
    add_common(forge);
    forge->add_option("--construction", construction, "construction name")->required();
    double delta_v = 0.0, b_v = 0.0, beta_alt_v = 0.0;
    auto* od = forge->add_option("--delta", delta_v, "free shift parameter");
    auto* ob = forge->add_option("--b", b_v, "free scale parameter near 1");
    auto* oba = forge->add_option("--beta-alt", beta_alt_v, "requested alternative intercept");
    forge->add_option("--zeta", zeta, "sign choice, +1 or -1");

    auto* simulate = app.add_subcommand("simulate", "draw replicated observations");
    add_common(simulate);
    simulate->add_option("--replicates", replicates, "number of replicates");
    simulate->add_option("--seed", seed, "RNG seed");

    auto* fit = app.add_subcommand("fit", "multi-start maximum likelihood");
    add_common(fit);
    fit->add_option("--data", data_dir, "dataset directory from `simulate`")->required();
    fit->add_option("--starts", starts, "number of optimizer starts");
    fit->add_option("--seed", seed, "start-perturbation seed");

    auto* profile = app.add_subcommand("profile", "profile likelihood over the intercept");
    add_common(profile);
    profile->add_option("--data", data_dir, "dataset directory from `simulate`")->required();
    profile->add_option("--beta-grid", grid_text, "grid as lo:hi:steps")->required();

    auto* specfun = app.add_subcommand("specfun", "special-function probes");
    double sf_nu = 0.5, sf_z = 1.0, sf_phi1 = 2.0, sf_phi2 = 1.0;
    int sf_count = 10;
    std::string sf_what = "bessel";
    specfun->add_option("--what", sf_what, "bessel | matern | crossings");
    specfun->add_option("--nu", sf_nu, "order / smoothness");
    specfun->add_option("--z", sf_z, "argument or distance");
    specfun->add_option("--phi1", sf_phi1, "first range");
    specfun->add_option("--phi2", sf_phi2, "second range");
    specfun->add_option("--count", sf_count, "number of crossings");
    specfun->add_option("--out", out_path, "output file (default: stdout)");

    auto* graph_info = app.add_subcommand("graph-info", "graph diagnostics");
    graph_info->add_option("--graph", graph_path, "proximity matrix file")->required();
    graph_info->add_option("--tol-eig", tol_eig, "eigenvalue distinctness tolerance");
    graph_info->add_option("--out", out_path, "output file (default: stdout)");

    auto* demo = app.add_subcommand("demo", "four-graph indirect-neighbor comparison table");
    demo->add_option("--out", out_path, "output CSV (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    si::CheckTolerances tols;
    tols.eig_distinct = tol_eig;
    tols.param_distinct = tol_param;

    if (check->parsed()) {
        const si::ModelSpec spec = load_spec(model_path);
        const si::Matrix g = si::read_graph_file(graph_path);
        const si::IdentifiabilityReport rep = std::visit(
            [&](const auto& p) -> si::IdentifiabilityReport {
                using T = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<T, si::CarSPParams>)
                    return si::check_car(p, si::make_proximity(g), tols);
                else if constexpr (std::is_same_v<T, si::LerouxParams>)
                    return si::check_leroux(p, si::make_proximity(g), tols);
                else if constexpr (std::is_same_v<T, si::LmcParams>)
                    return si::check_lmc(p, tols);
                else if constexpr (std::is_same_v<T, si::BivariateParams>)
                    return si::check_bivariate(p, g, tols);
                else
                    return si::check_matern(p, g, known_smoothness, tols);
            },
            spec);
        emit(si::to_json(rep), out_path);
        print_report_table(rep);
        return 0;
    }

    if (forge->parsed()) {
        if (od->count()) delta = delta_v;
        if (ob->count()) bval = b_v;
        if (oba->count()) beta_alt = beta_alt_v;
        const si::ModelSpec spec = load_spec(model_path);
        const si::Matrix g = si::read_graph_file(graph_path);
        si::EquivalenceCertificate cert;
        if (construction == "car_phi0_alternative")
            cert = si::car_phi0_alternative(std::get<si::CarSPParams>(spec),
                                            si::make_proximity(g), delta, zeta);
        else if (construction == "car_fullyconnected_alternative")
            cert = si::car_fullyconnected_alternative(std::get<si::CarSPParams>(spec),
                                                      si::make_proximity(g), bval);
        else if (construction == "leroux_flex_equal_lambda_alternative")
            cert = si::leroux_flex_equal_lambda_alternative(std::get<si::LerouxParams>(spec),
                                                            si::make_proximity(g));
        else if (construction == "leroux_rho0_alternative")
            cert = si::leroux_rho0_alternative(std::get<si::LerouxParams>(spec),
                                               si::make_proximity(g));
        else if (construction == "leroux_pars_alternative")
            cert = si::leroux_pars_alternative(std::get<si::LerouxParams>(spec),
                                               si::make_proximity(g));
        else if (construction == "lmc_alternative")
            cert = si::lmc_alternative(std::get<si::LmcParams>(spec), g, delta);
        else if (construction == "bivariate_rho0_alternative")
            cert = si::bivariate_rho0_alternative(std::get<si::BivariateParams>(spec), g,
                                                  beta_alt);
        else
            throw si::DomainError("unknown construction: " + construction);
        emit(si::to_json(cert), out_path);
        return 0;
    }

    if (simulate->parsed()) {
        const si::ModelSpec spec = load_spec(model_path);
        const si::Matrix g = si::read_graph_file(graph_path);
        const si::Dataset ds = si::sample(spec, g, replicates, seed);
        const std::string dir = out_path.empty() ? "." : out_path;
        si::atomic_write(dir + "/Y.csv", si::matrix_to_csv(ds.y));
        si::atomic_write(dir + "/Z.csv", si::matrix_to_csv(ds.z));
        json meta;
        meta["seed"] = seed;
        meta["replicates"] = replicates;
        meta["graph"] = graph_path;
        meta["model"] = si::to_json(spec);
        si::atomic_write(dir + "/meta.json", meta.dump(2) + "\n");
        return 0;
    }

    if (fit->parsed() || profile->parsed()) {
        const si::ModelSpec spec = load_spec(model_path);
        const si::Matrix g = si::read_graph_file(graph_path);
        si::Dataset ds;
        ds.y = si::read_dense_csv(data_dir + "/Y.csv");
        ds.z = si::read_dense_csv(data_dir + "/Z.csv");
        if (fit->parsed()) {
            const si::FitResult fr = si::fit_mle(spec, g, ds, starts, seed);
            emit(si::to_json(fr), out_path);
        } else {
            const auto prof = si::profile_beta(spec, g, ds, parse_grid(grid_text));
            std::ostringstream os;
            os.precision(17);
            os << "beta,loglik,converged\n";
            for (const auto& pt : prof)
                os << pt.beta << ',' << pt.loglik << ',' << (pt.converged ? 1 : 0) << '\n';
            if (out_path.empty())
                std::cout << os.str();
            else
                si::atomic_write(out_path, os.str());
        }
        return 0;
    }

    if (specfun->parsed()) {
        json j;
        if (sf_what == "bessel") {
            j = {{"nu", sf_nu}, {"z", sf_z}, {"bessel_k", si::bessel_k(sf_nu, sf_z)}};
        } else if (sf_what == "matern") {
            j = {{"phi", sf_phi1}, {"nu", sf_nu}, {"w", sf_z},
                 {"matern", si::matern(sf_phi1, sf_nu, sf_z)}};
        } else if (sf_what == "crossings") {
            const si::WaveCrossings wc = si::wave_crossings(sf_phi1, sf_phi2, sf_count);
            j = {{"phi1", sf_phi1}, {"phi2", sf_phi2}, {"distances", wc.distances},
                 {"residuals", wc.residuals}};
        } else {
            throw si::DomainError("unknown probe: " + sf_what);
        }
        emit(j, out_path);
        return 0;
    }

    if (graph_info->parsed()) {
        const si::ProximityMatrix w = si::make_proximity(si::read_graph_file(graph_path));
        const si::DegreeMatrix d = si::degree_matrix(w);
        const si::ComponentPartition cp = si::connected_components(w);
        const si::SpectralDecomposition ns = si::normalized_spectrum(w, d);
        const si::SpectralDecomposition ls = si::laplacian_spectrum(w, d);
        json j;
        j["n"] = w.size();
        j["asymmetry"] = w.asymmetry;
        if (w.asymmetry > 1e-12)
            std::cerr << "warning: input symmetrized, max asymmetry " << w.asymmetry << "\n";
        j["binary"] = si::is_binary(w);
        j["components"] = cp.count();
        j["component_sizes"] = json::array();
        for (const auto& m : cp.members) j["component_sizes"].push_back(m.size());
        j["has_indirect_pair"] = si::has_indirect_pair(w, cp);
        j["normalized_spectrum"] = std::vector<double>(ns.values.begin(), ns.values.end());
        j["laplacian_spectrum"] = std::vector<double>(ls.values.begin(), ls.values.end());
        j["distinct_laplacian_eigenvalues"] = si::count_distinct(ls.values, tol_eig).count();
        emit(j, out_path);
        return 0;
    }

    if (demo->parsed()) {
        std::ostringstream os;
        os << "graph,description,indirect_pair_condition\n";
        for (const auto& dg : demo_graphs()) {
            const si::ComponentPartition cp = si::connected_components(dg.graph);
            const bool ok = si::has_indirect_pair(dg.graph, cp);
            os << dg.label << ",\"" << dg.description << "\"," << (ok ? "satisfied" : "violated")
               << "\n";
        }
        if (out_path.empty())
            std::cout << os.str();
        else
            si::atomic_write(out_path, os.str());
        return 0;
    }

    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const si::DomainError& e) {
        std::cerr << json{{"error", e.code()}, {"message", e.what()}}.dump() << "\n";
        return 1;
    } catch (const si::Error& e) {
        std::cerr << json{{"error", e.code()}, {"message", e.what()}}.dump() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump() << "\n";
        return 2;
    }
}
