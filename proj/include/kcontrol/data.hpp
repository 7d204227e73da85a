#pragma once

// Support sampling, toy targets, synthetic classification data and CSV I/O.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kcontrol/dataset.hpp"
#include "kcontrol/error.hpp"
#include "kcontrol/rkhs.hpp"

namespace kcontrol {

/// m distinct training inputs drawn uniformly without replacement. Rows
/// within 1e-12 of an already selected point are skipped.
[[nodiscard]] inline std::shared_ptr<const SupportSet> sample_support(const Dataset& train, Eigen::Index m,
                                                                      std::uint64_t seed, const KernelSpec& spec) {
    if (m < 1) throw InputError("support size m must be positive");
    const Eigen::Index N = train.size();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(N));
    for (Eigen::Index i = 0; i < N; ++i) order[static_cast<std::size_t>(i)] = i;
    std::mt19937_64 rng(seed);
    // Fisher-Yates with an explicit index draw so the permutation is fixed by the seed.
    for (Eigen::Index i = N - 1; i > 0; --i) {
        std::uniform_int_distribution<Eigen::Index> pick(0, i);
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(pick(rng))]);
    }
    std::vector<Eigen::Index> chosen;
    chosen.reserve(static_cast<std::size_t>(m));
    for (Eigen::Index idx : order) {
        const bool duplicate = std::any_of(chosen.begin(), chosen.end(), [&](Eigen::Index c) {
            return (train.inputs.row(idx) - train.inputs.row(c)).norm() <= SupportSet::kDistinctTolerance;
        });
        if (!duplicate) {
            chosen.push_back(idx);
            if (static_cast<Eigen::Index>(chosen.size()) == m) break;
        }
    }
    if (static_cast<Eigen::Index>(chosen.size()) < m) {
        throw InputError("training set has only " + std::to_string(chosen.size()) + " distinct inputs, need m = " +
                         std::to_string(m));
    }
    PointSet points(m, train.dim());
    for (Eigen::Index k = 0; k < m; ++k) points.row(k) = train.inputs.row(chosen[static_cast<std::size_t>(k)]);
    return std::make_shared<const SupportSet>(std::move(points), spec);
}

namespace detail {

inline PointSet uniform_box(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d, double lo, double hi) {
    std::uniform_real_distribution<double> unif(lo, hi);
    PointSet X(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < d; ++j) X(i, j) = unif(rng);
    return X;
}

}  // namespace detail

inline double sine_target(double x) { return std::sin(x); }

inline double linear3_target(double x1, double x2, double x3) { return 0.5 * x1 - 0.2 * x2 + 0.1 * x3; }

/// sin(x) on x ~ U[-pi, pi].
[[nodiscard]] inline Dataset toy_sine(Eigen::Index n, std::uint64_t seed) {
    if (n < 1) throw InputError("toy_sine requires n >= 1");
    std::mt19937_64 rng(seed);
    Dataset d;
    d.inputs = detail::uniform_box(rng, n, 1, -std::numbers::pi, std::numbers::pi);
    d.targets = d.inputs.col(0).unaryExpr(&sine_target);
    d.feature_names = {"x"};
    d.target_name = "y";
    return d;
}

/// 0.5 x1 - 0.2 x2 + 0.1 x3 on the cube [-3, 3]^3.
[[nodiscard]] inline Dataset toy_linear3(Eigen::Index n, std::uint64_t seed) {
    if (n < 1) throw InputError("toy_linear3 requires n >= 1");
    std::mt19937_64 rng(seed);
    Dataset d;
    d.inputs = detail::uniform_box(rng, n, 3, -3.0, 3.0);
    d.targets.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) d.targets(i) = linear3_target(d.inputs(i, 0), d.inputs(i, 1), d.inputs(i, 2));
    d.feature_names = {"x1", "x2", "x3"};
    d.target_name = "y";
    return d;
}

/// Balanced labels; class c in {0, 1} draws x ~ N((2c - 1) * separation * 1, I_d).
[[nodiscard]] inline Dataset two_gaussians(Eigen::Index n, Eigen::Index d, double separation, std::uint64_t seed) {
    if (n < 1 || d < 1) throw InputError("two_gaussians requires n >= 1 and d >= 1");
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(0.5);
    std::normal_distribution<double> normal(0.0, 1.0);
    Dataset out;
    out.task = Task::BinaryClassification;
    out.inputs.resize(n, d);
    out.targets.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const bool positive = coin(rng);
        out.targets(i) = positive ? 1.0 : 0.0;
        const double centre = positive ? separation : -separation;
        for (Eigen::Index j = 0; j < d; ++j) out.inputs(i, j) = centre + normal(rng);
    }
    for (Eigen::Index j = 0; j < d; ++j) out.feature_names.push_back("feature_" + std::to_string(j));
    out.target_name = "label";
    return out;
}

/// Fit z-score statistics on `train` and apply them to both splits.
inline void standardize_splits(Dataset& train, Dataset& test) {
    const FeatureStats stats = FeatureStats::fit(train.inputs);
    train.inputs = stats.apply(train.inputs);
    test.inputs = stats.apply(test.inputs);
    train.feature_stats = stats;
    test.feature_stats = stats;
}

/// Seeded split into disjoint train/test row sets. A train size of 0 takes
/// every row not used for testing.
[[nodiscard]] inline std::pair<Dataset, Dataset> split_dataset(const Dataset& all, Eigen::Index train_size,
                                                              Eigen::Index test_size, std::uint64_t seed) {
    const Eigen::Index N = all.size();
    if (test_size < 1 || test_size >= N) {
        throw ConfigError("test size " + std::to_string(test_size) + " must be in [1, " + std::to_string(N - 1) + "]");
    }
    if (train_size == 0) train_size = N - test_size;
    if (train_size < 1 || train_size + test_size > N) {
        throw ConfigError("train size " + std::to_string(train_size) + " plus test size exceeds " + std::to_string(N) +
                          " rows");
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(N));
    for (Eigen::Index i = 0; i < N; ++i) order[static_cast<std::size_t>(i)] = i;
    std::mt19937_64 rng(seed);
    for (Eigen::Index i = N - 1; i > 0; --i) {
        std::uniform_int_distribution<Eigen::Index> pick(0, i);
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(pick(rng))]);
    }
    const std::vector<Eigen::Index> test_rows(order.begin(), order.begin() + test_size);
    const std::vector<Eigen::Index> train_rows(order.begin() + test_size, order.begin() + test_size + train_size);
    return {all.subset(train_rows), all.subset(test_rows)};
}

// ---------------------------------------------------------------------------
// CSV

struct CsvOptions {
    std::string label_column;                  // empty: "label", else "target", else the last column
    std::vector<std::string> feature_columns;  // empty: feature_* columns, else every other numeric column
    Task task = Task::Regression;
    bool standardize = false;
};

namespace detail {

inline std::string trim(std::string s) {
    auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

/// Split one CSV record; double quotes protect commas, "" is a literal quote.
inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(trim(field));
            field.clear();
        } else {
            field += c;
        }
    }
    out.push_back(trim(field));
    return out;
}

inline std::optional<double> parse_double(const std::string& s) {
    if (s.empty()) return std::nullopt;
    double value = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (*first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) return std::nullopt;
    return value;
}

inline bool is_ignored_column(const std::string& name) {
    std::string lower;
    for (char c : name) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return lower == "id" || lower == "eventid" || lower == "weight" || lower == "kaggleweight" ||
           lower == "kaggleset";
}

/// Label token to a number; "s"/"b" are the signal/background labels of
/// the Higgs challenge files.
inline std::optional<double> parse_label(const std::string& s, Task task) {
    if (task == Task::BinaryClassification) {
        if (s == "s") return 1.0;
        if (s == "b") return 0.0;
    }
    return parse_double(s);
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace detail

/// Headered CSV to a Dataset. Lines starting with '#' are comments.
[[nodiscard]] inline Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options) {
    std::istringstream in(detail::read_text(path));
    std::string line;
    std::vector<std::string> header;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        header = detail::split_csv_line(line);
        break;
    }
    if (header.empty()) throw InputError("'" + path.string() + "' is empty");
    // Drop a UTF-8 byte-order mark.
    if (header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0] = header[0].substr(3);

    auto column_of = [&](const std::string& name) -> std::optional<std::size_t> {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) return std::nullopt;
        return static_cast<std::size_t>(it - header.begin());
    };

    std::string label_name = options.label_column;
    if (label_name.empty()) {
        if (column_of("label")) label_name = "label";
        else if (column_of("Label")) label_name = "Label";
        else if (column_of("target")) label_name = "target";
        else label_name = header.back();
    }
    const auto label_col = column_of(label_name);
    if (!label_col) throw SchemaError("missing label column '" + label_name + "' in '" + path.string() + "'");

    std::vector<std::size_t> feature_cols;
    std::vector<std::string> feature_names;
    if (!options.feature_columns.empty()) {
        for (const auto& name : options.feature_columns) {
            const auto c = column_of(name);
            if (!c) throw SchemaError("missing feature column '" + name + "' in '" + path.string() + "'");
            feature_cols.push_back(*c);
            feature_names.push_back(name);
        }
    } else {
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (header[c].rfind("feature_", 0) == 0) {
                feature_cols.push_back(c);
                feature_names.push_back(header[c]);
            }
        }
        if (feature_cols.empty()) {
            for (std::size_t c = 0; c < header.size(); ++c) {
                if (c != *label_col && !detail::is_ignored_column(header[c])) {
                    feature_cols.push_back(c);
                    feature_names.push_back(header[c]);
                }
            }
        }
    }
    if (feature_cols.empty()) throw SchemaError("no feature columns in '" + path.string() + "'");

    std::vector<double> values;
    std::vector<double> labels;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::trim(line).empty() || line[0] == '#') continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != header.size()) {
            throw InputError("row " + std::to_string(row) + " (line " + std::to_string(line_no) + ") has " +
                             std::to_string(fields.size()) + " fields, header has " + std::to_string(header.size()));
        }
        for (std::size_t k = 0; k < feature_cols.size(); ++k) {
            const auto v = detail::parse_double(fields[feature_cols[k]]);
            if (!v) {
                throw InputError("row " + std::to_string(row) + " (line " + std::to_string(line_no) +
                                 "): cannot parse '" + fields[feature_cols[k]] + "' in column '" + feature_names[k] +
                                 "'");
            }
            values.push_back(*v);
        }
        const auto y = detail::parse_label(fields[*label_col], options.task);
        if (!y) {
            throw InputError("row " + std::to_string(row) + " (line " + std::to_string(line_no) +
                             "): cannot parse label '" + fields[*label_col] + "'");
        }
        labels.push_back(*y);
        ++row;
    }
    if (row == 0) throw InputError("'" + path.string() + "' has a header but no data rows");

    Dataset d;
    d.task = options.task;
    d.feature_names = std::move(feature_names);
    d.target_name = label_name;
    const auto n = static_cast<Eigen::Index>(row);
    const auto p = static_cast<Eigen::Index>(feature_cols.size());
    d.inputs = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(values.data(),
                                                                                                        n, p);
    d.targets = Eigen::Map<const Vector>(labels.data(), n);
    d.validate();
    if (options.standardize) {
        const FeatureStats stats = FeatureStats::fit(d.inputs);
        d.inputs = stats.apply(d.inputs);
        d.feature_stats = stats;
    }
    return d;
}

namespace detail {

inline std::string format_double(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw IoError("cannot format number");
    return std::string(buf, ptr);
}

/// Write via a sibling temporary file and rename into place.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write '" + tmp.string() + "'");
        out << content;
        if (!out) throw IoError("write to '" + tmp.string() + "' failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot move output into '" + path.string() + "'");
    }
}

}  // namespace detail

/// CSV text of a dataset: features then target, shortest round-trip numbers.
[[nodiscard]] inline std::string dataset_to_csv(const Dataset& d, const std::vector<std::string>& comments = {}) {
    std::string out;
    for (const auto& c : comments) out += "# " + c + "\n";
    const auto names = d.resolved_feature_names();
    for (const auto& name : names) out += name + ",";
    out += d.target_name + "\n";
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        for (Eigen::Index j = 0; j < d.dim(); ++j) out += detail::format_double(d.inputs(i, j)) + ",";
        out += detail::format_double(d.targets(i)) + "\n";
    }
    return out;
}

inline void write_csv(const Dataset& d, const std::filesystem::path& path, const std::vector<std::string>& comments = {}) {
    detail::write_file_atomic(path, dataset_to_csv(d, comments));
}

}  // namespace kcontrol
