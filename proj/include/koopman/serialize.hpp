#pragma once

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "koopman/coefficient_basis.hpp"
#include "koopman/dictionary.hpp"
#include "koopman/edmd.hpp"
#include "koopman/errors.hpp"
#include "koopman/systems.hpp"
#include "koopman/tssd.hpp"

namespace koopman {

using Json = nlohmann::json;

namespace io {

// %.17g round-trips IEEE doubles exactly; all CSV output goes through here so
// files are reproducible bit for bit.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline Json matrix_to_json(const Matrix& m) {
    Json rows = Json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}

inline Matrix matrix_from_json(const Json& j) {
    const Index rows = j.at("rows").get<Index>();
    const Index cols = j.at("cols").get<Index>();
    Matrix m(rows, cols);
    const Json& data = j.at("data");
    if (static_cast<Index>(data.size()) != rows)
        throw ConfigError("matrix JSON: row count mismatch");
    for (Index i = 0; i < rows; ++i) {
        const Json& row = data.at(i);
        if (static_cast<Index>(row.size()) != cols)
            throw ConfigError("matrix JSON: column count mismatch");
        for (Index j2 = 0; j2 < cols; ++j2) m(i, j2) = row.at(j2).get<double>();
    }
    return m;
}

inline void save_json(const std::string& path, const Json& j) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
}

inline Json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open for reading: " + path);
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& err) {
        throw ConfigError("malformed JSON in " + path + ": " + err.what());
    }
}

}  // namespace io

inline Json to_json(const Dictionary& dict) {
    return Json{{"format", "dictionary"},
                {"version", 1},
                {"n_vars", dict.n_vars},
                {"max_degree", dict.max_degree},
                {"terms", dict.terms},
                {"transform", io::matrix_to_json(dict.transform)}};
}

inline Dictionary dictionary_from_json(const Json& j) {
    if (j.value("format", "") != "dictionary" || j.value("version", 0) != 1)
        throw ConfigError("not a version-1 dictionary document");
    Dictionary d;
    d.n_vars = j.at("n_vars").get<int>();
    d.max_degree = j.at("max_degree").get<int>();
    d.terms = j.at("terms").get<std::vector<std::vector<int>>>();
    d.transform = io::matrix_from_json(j.at("transform"));
    if (d.transform.rows() != d.raw_size())
        throw ConfigError("dictionary document: transform rows do not match terms");
    return d;
}

inline Json to_json(const CoefficientBasis& basis) {
    return Json{{"format", "coefficient_basis"},
                {"version", 1},
                {"ambient_dim", basis.ambient_dim()},
                {"dim", basis.dim()},
                {"matrix", io::matrix_to_json(basis.matrix)}};
}

inline CoefficientBasis coefficient_basis_from_json(const Json& j) {
    if (j.value("format", "") != "coefficient_basis" || j.value("version", 0) != 1)
        throw ConfigError("not a version-1 coefficient basis document");
    CoefficientBasis b{io::matrix_from_json(j.at("matrix"))};
    if (b.matrix.rows() == 0 && j.at("ambient_dim").get<Index>() > 0)
        b.matrix.resize(j.at("ambient_dim").get<Index>(), 0);
    return b;
}

inline Json to_json(const KoopmanModel& model) {
    Json pairs = Json::array();
    for (const auto& p : model.eigenpairs) {
        Json vec_re = Json::array(), vec_im = Json::array();
        for (Index i = 0; i < p.vector.size(); ++i) {
            vec_re.push_back(p.vector(i).real());
            vec_im.push_back(p.vector(i).imag());
        }
        pairs.push_back(Json{{"value", {p.value.real(), p.value.imag()}},
                             {"vector_re", std::move(vec_re)},
                             {"vector_im", std::move(vec_im)}});
    }
    return Json{{"format", "koopman_model"},
                {"version", 1},
                {"dictionary", to_json(model.dictionary)},
                {"K", io::matrix_to_json(model.K)},
                {"fit_residual", model.fit_residual},
                {"eigenpairs", std::move(pairs)}};
}

inline KoopmanModel koopman_model_from_json(const Json& j) {
    if (j.value("format", "") != "koopman_model" || j.value("version", 0) != 1)
        throw ConfigError("not a version-1 Koopman model document");
    KoopmanModel model;
    model.dictionary = dictionary_from_json(j.at("dictionary"));
    model.K = io::matrix_from_json(j.at("K"));
    model.fit_residual = j.at("fit_residual").get<double>();
    for (const Json& p : j.at("eigenpairs")) {
        Eigenpair pair;
        pair.value = {p.at("value").at(0).get<double>(), p.at("value").at(1).get<double>()};
        const auto re = p.at("vector_re").get<std::vector<double>>();
        const auto im = p.at("vector_im").get<std::vector<double>>();
        if (re.size() != im.size()) throw ConfigError("model document: eigenvector size mismatch");
        pair.vector.resize(re.size());
        for (std::size_t i = 0; i < re.size(); ++i)
            pair.vector(i) = {re[i], im[i]};
        model.eigenpairs.push_back(std::move(pair));
    }
    return model;
}

inline Json to_json(const TssdTrace& trace) {
    Json iters = Json::array();
    for (const auto& rec : trace.iterations)
        iters.push_back(Json{{"iter", rec.iter},
                             {"dim_V", rec.dim_V},
                             {"dim_E", rec.dim_E},
                             {"dim_C", rec.dim_C},
                             {"lambda_max_abs", rec.lambda_max_abs}});
    return Json{{"format", "tssd_trace"},
                {"version", 1},
                {"terminated_by", trace.terminated_by == TssdTermination::complete
                                      ? "complete"
                                      : "subspace_not_exist"},
                {"iters_used", trace.iters_used},
                {"epsilon_effective", trace.epsilon_effective},
                {"epsilon_substituted", trace.epsilon_substituted},
                {"iterations", std::move(iters)}};
}

/// Snapshot-file metadata carried in the CSV header line.
struct SnapshotMeta {
    std::string system;
    double dt = 0.0;
    std::uint64_t seed = 0;
};

/// CSV layout: `# snapshots v1; system=<name>; dt=<dt>; seed=<seed>` followed
/// by one `x_1,...,x_n,y_1,...,y_n` row per pair. The v1 format pins the
/// sampling generator (mt19937_64, top-53-bit mapping), so identical headers
/// reproduce identical files.
inline void write_snapshots_csv(const std::string& path, const SnapshotPair& pair,
                                const SnapshotMeta& meta) {
    if (pair.X.rows() != pair.Y.rows() || pair.X.cols() != pair.Y.cols())
        throw InputError("write_snapshots_csv: X and Y differ in shape");
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    out << "# snapshots v1; system=" << meta.system << "; dt=" << io::format_double(meta.dt)
        << "; seed=" << meta.seed << "\n";
    for (Index i = 0; i < pair.X.rows(); ++i) {
        for (Index j = 0; j < pair.X.cols(); ++j)
            out << (j ? "," : "") << io::format_double(pair.X(i, j));
        for (Index j = 0; j < pair.Y.cols(); ++j) out << "," << io::format_double(pair.Y(i, j));
        out << "\n";
    }
}

struct SnapshotFile {
    SnapshotPair pair;
    SnapshotMeta meta;
};

inline SnapshotFile read_snapshots_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open for reading: " + path);
    std::string header;
    if (!std::getline(in, header) || header.rfind("# snapshots v1", 0) != 0)
        throw ConfigError(path + ": missing '# snapshots v1' header");
    SnapshotFile file;
    std::stringstream hs(header);
    std::string field;
    while (std::getline(hs, field, ';')) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) continue;
        std::string key = field.substr(0, eq), value = field.substr(eq + 1);
        key.erase(0, key.find_first_not_of(' '));
        if (key == "system") file.meta.system = value;
        else if (key == "dt") file.meta.dt = std::strtod(value.c_str(), nullptr);
        else if (key == "seed") file.meta.seed = std::strtoull(value.c_str(), nullptr, 10);
    }

    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> row;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
        if (!rows.empty() && row.size() != rows.front().size())
            throw ConfigError(path + ": ragged snapshot rows");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ConfigError(path + ": no snapshot rows");
    if (rows.front().size() % 2 != 0)
        throw ConfigError(path + ": expected an even number of columns (x then y)");
    const Index n = static_cast<Index>(rows.size());
    const Index dim = static_cast<Index>(rows.front().size() / 2);
    file.pair.X.resize(n, dim);
    file.pair.Y.resize(n, dim);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < dim; ++j) {
            file.pair.X(i, j) = rows[i][j];
            file.pair.Y(i, j) = rows[i][dim + j];
        }
    return file;
}

}  // namespace koopman
