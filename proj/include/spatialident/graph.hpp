#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "spatialident/errors.hpp"

namespace spatialident {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Symmetric nonnegative proximity matrix with zero diagonal.
///
/// `asymmetry` records the largest |W_ij - W_ji| seen before the input was
/// symmetrized to (W + W^T)/2; callers can surface a warning when it exceeds
/// 1e-12.
struct ProximityMatrix {
    Matrix w;
    double asymmetry = 0.0;

    int size() const { return static_cast<int>(w.rows()); }
};

/// Builds a validated ProximityMatrix from a raw square matrix.
inline ProximityMatrix make_proximity(const Matrix& raw) {
    if (raw.rows() != raw.cols() || raw.rows() < 1)
        throw DomainError("proximity matrix must be square and nonempty");
    ProximityMatrix p;
    p.asymmetry = (raw - raw.transpose()).cwiseAbs().maxCoeff();
    p.w = 0.5 * (raw + raw.transpose());
    for (int i = 0; i < p.size(); ++i) {
        if (p.w(i, i) != 0.0)
            throw DomainError("proximity matrix must have a zero diagonal");
        for (int j = 0; j < p.size(); ++j)
            if (p.w(i, j) < 0.0)
                throw DomainError("proximity weights must be nonnegative");
    }
    return p;
}

/// Row sums of W, stored as a vector (the diagonal of D).
struct DegreeMatrix {
    Vector d;

    Matrix dense() const { return Matrix(d.asDiagonal()); }
    Vector sqrt() const { return d.cwiseSqrt(); }
    Vector inv_sqrt() const { return d.cwiseSqrt().cwiseInverse(); }
};

/// Computes D = diag(row sums of W); throws ZeroDegreeError on isolated rows.
inline DegreeMatrix degree_matrix(const ProximityMatrix& p) {
    DegreeMatrix dm;
    dm.d = p.w.rowwise().sum();
    for (int i = 0; i < dm.d.size(); ++i)
        if (dm.d(i) <= 0.0)
            throw ZeroDegreeError("row " + std::to_string(i) +
                                  " of the proximity matrix has zero degree");
    return dm;
}

/// Connected-component labelling of the graph with edges {i,j : W_ij > 0}.
struct ComponentPartition {
    std::vector<int> label;                 // component id per vertex
    std::vector<std::vector<int>> members;  // vertices per component

    int count() const { return static_cast<int>(members.size()); }
};

inline ComponentPartition connected_components(const ProximityMatrix& p) {
    const int n = p.size();
    ComponentPartition cp;
    cp.label.assign(n, -1);
    for (int s = 0; s < n; ++s) {
        if (cp.label[s] >= 0) continue;
        const int id = cp.count();
        cp.members.emplace_back();
        std::vector<int> stack{s};
        cp.label[s] = id;
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            cp.members[id].push_back(v);
            for (int j = 0; j < n; ++j)
                if (p.w(v, j) > 0.0 && cp.label[j] < 0) {
                    cp.label[j] = id;
                    stack.push_back(j);
                }
        }
        std::sort(cp.members[id].begin(), cp.members[id].end());
    }
    return cp;
}

/// Orthogonal eigendecomposition M = vectors * values.asDiagonal() * vectors^T.
struct SpectralDecomposition {
    Vector values;   // ascending
    Matrix vectors;  // orthonormal columns
};

inline SpectralDecomposition symmetric_eigen(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m);
    if (es.info() != Eigen::Success)
        throw ConvergenceError("symmetric eigendecomposition failed");
    return {es.eigenvalues(), es.eigenvectors()};
}

/// Eigendecomposition of the degree-normalized proximity D^{-1/2} W D^{-1/2}.
inline SpectralDecomposition normalized_spectrum(const ProximityMatrix& p,
                                                 const DegreeMatrix& d) {
    const Vector dis = d.inv_sqrt();
    return symmetric_eigen(dis.asDiagonal() * p.w * dis.asDiagonal());
}

/// Eigendecomposition of the graph Laplacian D - W.
inline SpectralDecomposition laplacian_spectrum(const ProximityMatrix& p,
                                                const DegreeMatrix& d) {
    return symmetric_eigen(Matrix(d.d.asDiagonal()) - p.w);
}

/// Groups sorted values into clusters whose internal gaps are at most
/// rel_tol * max(1, spread), where spread = max - min. Returns one
/// representative (cluster mean) and a multiplicity per cluster.
struct DistinctValues {
    std::vector<double> representative;
    std::vector<int> multiplicity;

    int count() const { return static_cast<int>(representative.size()); }
};

inline DistinctValues count_distinct(Vector values, double rel_tol = 1e-8) {
    if (values.size() == 0) throw DomainError("count_distinct on empty vector");
    std::sort(values.begin(), values.end());
    const double spread = values(values.size() - 1) - values(0);
    const double tol = rel_tol * std::max(1.0, spread);
    DistinctValues dv;
    double sum = values(0);
    int run = 1;
    for (int i = 1; i < values.size(); ++i) {
        if (values(i) - values(i - 1) <= tol) {
            sum += values(i);
            ++run;
        } else {
            dv.representative.push_back(sum / run);
            dv.multiplicity.push_back(run);
            sum = values(i);
            run = 1;
        }
    }
    dv.representative.push_back(sum / run);
    dv.multiplicity.push_back(run);
    return dv;
}

/// Extracts the principal submatrix of W on a vertex subset.
inline Matrix submatrix(const Matrix& m, const std::vector<int>& idx) {
    Matrix out(idx.size(), idx.size());
    for (std::size_t a = 0; a < idx.size(); ++a)
        for (std::size_t b = 0; b < idx.size(); ++b)
            out(a, b) = m(idx[a], idx[b]);
    return out;
}

/// True when every entry of W is in {0, 1}.
inline bool is_binary(const ProximityMatrix& p) {
    for (int i = 0; i < p.size(); ++i)
        for (int j = 0; j < p.size(); ++j)
            if (p.w(i, j) != 0.0 && p.w(i, j) != 1.0) return false;
    return true;
}

/// True when some pair of vertices in the same component is not directly
/// linked (W_ij = 0 with i != j).
inline bool has_indirect_pair(const ProximityMatrix& p, const ComponentPartition& cp) {
    for (const auto& comp : cp.members)
        for (std::size_t a = 0; a < comp.size(); ++a)
            for (std::size_t b = a + 1; b < comp.size(); ++b)
                if (p.w(comp[a], comp[b]) == 0.0) return true;
    return false;
}

// Small graph constructors used by tests and the demo subcommand.

/// Cycle graph on n vertices with unit weights.
inline ProximityMatrix ring_graph(int n) {
    if (n < 3) throw DomainError("ring graph needs at least 3 vertices");
    Matrix w = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        w(i, (i + 1) % n) = 1.0;
        w((i + 1) % n, i) = 1.0;
    }
    return make_proximity(w);
}

/// Complete graph on n vertices with unit weights.
inline ProximityMatrix complete_graph(int n) {
    if (n < 2) throw DomainError("complete graph needs at least 2 vertices");
    Matrix w = Matrix::Ones(n, n);
    w.diagonal().setZero();
    return make_proximity(w);
}

/// Union of m disjoint edges (2m vertices).
inline ProximityMatrix disjoint_edges_graph(int m) {
    if (m < 1) throw DomainError("need at least one edge");
    Matrix w = Matrix::Zero(2 * m, 2 * m);
    for (int k = 0; k < m; ++k) {
        w(2 * k, 2 * k + 1) = 1.0;
        w(2 * k + 1, 2 * k) = 1.0;
    }
    return make_proximity(w);
}

/// Path graph on n vertices with unit weights.
inline ProximityMatrix path_graph(int n) {
    if (n < 2) throw DomainError("path graph needs at least 2 vertices");
    Matrix w = Matrix::Zero(n, n);
    for (int i = 0; i + 1 < n; ++i) {
        w(i, i + 1) = 1.0;
        w(i + 1, i) = 1.0;
    }
    return make_proximity(w);
}

} // namespace spatialident
