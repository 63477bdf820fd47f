#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spatialident/forge.hpp"
#include "spatialident/identify.hpp"
#include "spatialident/mc.hpp"

namespace spatialident {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Model specs. JSON carries a "family" tag plus a flat parameter map; field
// names are documented in docs/model_spec.md.

inline json to_json(const ModelSpec& spec) {
    return std::visit(
        [](const auto& p) -> json {
            using T = std::decay_t<decltype(p)>;
            json j;
            if constexpr (std::is_same_v<T, CarSPParams>) {
                j["family"] = "car";
                j["beta"] = p.beta;
                j["tau_u"] = p.tau_u;
                j["tau_z"] = p.tau_z;
                j["phi_u"] = p.phi_u;
                j["phi_z"] = p.phi_z;
                j["rho"] = p.rho;
                j["sigma2_eps"] = p.sigma2_eps;
            } else if constexpr (std::is_same_v<T, LerouxParams>) {
                j["family"] = "leroux";
                j["beta"] = p.beta;
                j["sigma2_u"] = p.sigma2_u;
                j["sigma2_z"] = p.sigma2_z;
                j["lambda_u"] = p.lambda_u;
                j["lambda_z"] = p.lambda_z;
                j["rho"] = p.rho;
                j["sigma2_eps"] = p.sigma2_eps;
                j["cross"] = p.cross == LerouxCross::Parsimonious ? "parsimonious"
                                                                  : "non_parsimonious";
                if (p.cross == LerouxCross::NonParsimonious) j["lambda_uz"] = p.lambda_uz;
            } else if constexpr (std::is_same_v<T, LmcParams>) {
                j["family"] = "lmc";
                j["beta"] = p.beta;
                j["a"] = p.a;
                j["b"] = p.b;
                j["phi"] = p.phi;
                j["cov_family"] = to_string(p.family);
                j["shape"] = p.shape;
                j["sigma2_eps"] = p.sigma2_eps;
            } else if constexpr (std::is_same_v<T, BivariateParams>) {
                j["family"] = "bivariate";
                j["beta"] = p.beta;
                j["sigma2_u"] = p.sigma2_u;
                j["sigma2_z"] = p.sigma2_z;
                j["rho"] = p.rho;
                j["psi_u"] = p.psi_u;
                j["psi_z"] = p.psi_z;
                j["psi_uz"] = p.psi_uz;
                j["cov_family"] = to_string(p.family);
                j["shape"] = p.shape;
                j["sigma2_eps"] = p.sigma2_eps;
            } else {
                j["family"] = "pars_matern";
                j["beta"] = p.beta;
                j["sigma2_u"] = p.sigma2_u;
                j["sigma2_z"] = p.sigma2_z;
                j["rho"] = p.rho;
                j["phi"] = p.phi;
                j["nu_u"] = p.nu_u;
                j["nu_z"] = p.nu_z;
                j["sigma2_eps"] = p.sigma2_eps;
            }
            return j;
        },
        spec);
}

inline ModelSpec model_spec_from_json(const json& j) {
    if (!j.contains("family")) throw DomainError("model spec is missing the family tag");
    const std::string fam = j.at("family").get<std::string>();
    try {
        if (fam == "car") {
            CarSPParams p;
            p.beta = j.at("beta").get<double>();
            p.tau_u = j.at("tau_u").get<double>();
            p.tau_z = j.at("tau_z").get<double>();
            p.phi_u = j.at("phi_u").get<double>();
            p.phi_z = j.at("phi_z").get<double>();
            p.rho = j.at("rho").get<double>();
            p.sigma2_eps = j.at("sigma2_eps").get<double>();
            p.validate();
            return p;
        }
        if (fam == "leroux") {
            LerouxParams p;
            p.beta = j.at("beta").get<double>();
            p.sigma2_u = j.at("sigma2_u").get<double>();
            p.sigma2_z = j.at("sigma2_z").get<double>();
            p.lambda_u = j.at("lambda_u").get<double>();
            p.lambda_z = j.at("lambda_z").get<double>();
            p.rho = j.at("rho").get<double>();
            p.sigma2_eps = j.at("sigma2_eps").get<double>();
            const std::string cross = j.at("cross").get<std::string>();
            if (cross == "parsimonious") {
                p.cross = LerouxCross::Parsimonious;
            } else if (cross == "non_parsimonious") {
                p.cross = LerouxCross::NonParsimonious;
                p.lambda_uz = j.at("lambda_uz").get<double>();
            } else {
                throw DomainError("unknown cross structure: " + cross);
            }
            p.validate();
            return p;
        }
        if (fam == "lmc") {
            LmcParams p;
            p.beta = j.at("beta").get<double>();
            p.a = j.at("a").get<std::vector<double>>();
            p.b = j.at("b").get<std::vector<double>>();
            p.phi = j.at("phi").get<std::vector<double>>();
            p.family = cov_family_from_string(j.at("cov_family").get<std::string>());
            p.shape = j.value("shape", 1.0);
            p.sigma2_eps = j.at("sigma2_eps").get<double>();
            p.validate();
            return p;
        }
        if (fam == "bivariate") {
            BivariateParams p;
            p.beta = j.at("beta").get<double>();
            p.sigma2_u = j.at("sigma2_u").get<double>();
            p.sigma2_z = j.at("sigma2_z").get<double>();
            p.rho = j.at("rho").get<double>();
            p.psi_u = j.at("psi_u").get<double>();
            p.psi_z = j.at("psi_z").get<double>();
            p.psi_uz = j.at("psi_uz").get<double>();
            p.family = cov_family_from_string(j.at("cov_family").get<std::string>());
            p.shape = j.value("shape", 1.0);
            p.sigma2_eps = j.at("sigma2_eps").get<double>();
            p.validate();
            return p;
        }
        if (fam == "pars_matern") {
            ParsMaternParams p;
            p.beta = j.at("beta").get<double>();
            p.sigma2_u = j.at("sigma2_u").get<double>();
            p.sigma2_z = j.at("sigma2_z").get<double>();
            p.rho = j.at("rho").get<double>();
            p.phi = j.at("phi").get<double>();
            p.nu_u = j.at("nu_u").get<double>();
            p.nu_z = j.at("nu_z").get<double>();
            p.sigma2_eps = j.at("sigma2_eps").get<double>();
            p.validate();
            return p;
        }
    } catch (const json::exception& e) {
        throw DomainError(std::string("malformed model spec: ") + e.what());
    }
    throw DomainError("unknown model family: " + fam);
}

// ---------------------------------------------------------------------------
// Reports and certificates.

inline json to_json(const IdentifiabilityReport& r) {
    json j;
    j["theorem"] = to_string(r.theorem);
    j["verdict"] = to_string(r.verdict);
    j["conditions"] = json::array();
    for (const auto& c : r.conditions)
        j["conditions"].push_back({{"name", c.name},
                                   {"required", c.required},
                                   {"measured", c.measured},
                                   {"pass", c.pass}});
    if (!r.construction.empty()) j["construction"] = r.construction;
    if (!r.note.empty()) j["note"] = r.note;
    j["tolerances"] = {{"param_nonzero", r.tolerances.param_nonzero},
                       {"param_distinct", r.tolerances.param_distinct},
                       {"eig_distinct", r.tolerances.eig_distinct}};
    return j;
}

inline json to_json(const EquivalenceCertificate& c) {
    json j;
    j["construction"] = c.construction;
    j["original"] = to_json(c.original);
    j["alternative"] = to_json(c.alternative);
    j["beta_gap"] = c.beta_gap;
    j["max_moment_discrepancy"] = c.max_moment_discrepancy;
    j["valid"] = c.valid;
    j["certifies_non_identifiability"] = c.certifies();
    return j;
}

inline EquivalenceCertificate certificate_from_json(const json& j) {
    EquivalenceCertificate c;
    c.construction = j.at("construction").get<std::string>();
    c.original = model_spec_from_json(j.at("original"));
    c.alternative = model_spec_from_json(j.at("alternative"));
    c.beta_gap = j.at("beta_gap").get<double>();
    c.max_moment_discrepancy = j.at("max_moment_discrepancy").get<double>();
    c.valid = j.at("valid").get<bool>();
    return c;
}

inline json to_json(const FitResult& f) {
    json j;
    j["family"] = f.family;
    j["estimate"] = to_json(f.estimate);
    j["loglik"] = f.loglik;
    j["converged"] = f.converged;
    j["n_starts"] = f.n_starts;
    j["start_dispersion"] = f.start_dispersion;
    j["loglik_spread"] = f.loglik_spread;
    j["starts"] = json::array();
    for (const auto& s : f.starts)
        j["starts"].push_back({{"beta", spec_beta(s.estimate)},
                               {"loglik", s.loglik},
                               {"converged", s.converged}});
    return j;
}

// ---------------------------------------------------------------------------
// Matrices and graphs. Dense CSV has one row per line; an edge list has
// whitespace-separated "i j weight" triples with 0-based indices, closed
// symmetrically.

inline Matrix read_dense_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (!row.empty()) rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DomainError("empty matrix file: " + path);
    Matrix m(rows.size(), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows[0].size())
            throw DomainError("ragged rows in matrix file: " + path);
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
    }
    return m;
}

inline Matrix read_edge_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open " + path);
    struct Edge {
        int i, j;
        double w;
    };
    std::vector<Edge> edges;
    int n = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        Edge e;
        if (!(ss >> e.i >> e.j)) throw DomainError("malformed edge line: " + line);
        if (!(ss >> e.w)) e.w = 1.0;
        if (e.i < 0 || e.j < 0) throw DomainError("edge indices must be nonnegative");
        n = std::max({n, e.i + 1, e.j + 1});
        edges.push_back(e);
    }
    if (edges.empty()) throw DomainError("empty edge list: " + path);
    Matrix m = Matrix::Zero(n, n);
    for (const auto& e : edges) {
        m(e.i, e.j) = e.w;
        m(e.j, e.i) = e.w;
    }
    return m;
}

/// Reads a graph or distance matrix; files whose first data line contains a
/// comma are treated as dense CSV, otherwise as an edge list.
inline Matrix read_graph_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open " + path);
    std::string line;
    while (std::getline(in, line))
        if (!line.empty() && line[0] != '#')
            return line.find(',') != std::string::npos ? read_dense_csv(path)
                                                       : read_edge_list(path);
    throw DomainError("empty graph file: " + path);
}

/// Writes content to a temporary sibling file and renames it into place, so
/// readers never observe a partial file.
inline void atomic_write(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw DomainError("cannot write " + tmp);
        out << content;
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw DomainError("cannot rename " + tmp + " to " + path);
}

inline std::string matrix_to_csv(const Matrix& m) {
    std::ostringstream os;
    os.precision(17);
    for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j) {
            if (j) os << ',';
            os << m(i, j);
        }
        os << '\n';
    }
    return os.str();
}

} // namespace spatialident
