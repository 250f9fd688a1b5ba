#include "flexssl/dataset.hpp"

#include "flexssl/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

namespace flexssl {

double SemiDataset::missing_fraction() const {
    return size() == 0 ? 0.0 : static_cast<double>(unlabeled.size()) / static_cast<double>(size());
}

void SemiDataset::reindex() {
    labeled.clear();
    unlabeled.clear();
    for (std::size_t i = 0; i < mask.size(); ++i) (mask[i] ? labeled : unlabeled).push_back(i);
}

void SemiDataset::validate() const {
    const std::size_t n = x.rows;
    if (y.rows != n || mask.size() != n) {
        throw DatasetError(fmt::format("dataset: row counts differ (x {}, y {}, mask {})", n, y.rows, mask.size()));
    }
    if (y.cols != task.label_cols()) {
        throw DatasetError(fmt::format("dataset: expected {} label columns, got {}", task.label_cols(), y.cols));
    }
    if (labeled.size() + unlabeled.size() != n) throw DatasetError("dataset: L and U do not cover all rows");
    for (std::size_t i : labeled)
        if (!mask[i]) throw DatasetError(fmt::format("dataset: row {} listed as labeled but masked", i));
    for (std::size_t j : unlabeled)
        if (mask[j]) throw DatasetError(fmt::format("dataset: row {} listed as unlabeled but observed", j));
    if (task.is_classification()) {
        const std::size_t k = task.out_dim();
        std::vector<std::size_t> per_class(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const double c = y(i, 0);
            if (c < 0 || c >= static_cast<double>(k) || c != std::floor(c)) {
                throw DatasetError(fmt::format("dataset: row {} label {} outside [0, {})", i, c, k));
            }
        }
        for (std::size_t i : labeled) ++per_class[static_cast<std::size_t>(y(i, 0))];
        if (n > 0) {
            for (std::size_t c = 0; c < k; ++c)
                if (per_class[c] == 0) throw DatasetError(fmt::format("dataset: class {} has no labeled sample", c));
        }
    }
}

// ---- generators ------------------------------------------------------------

SemiDataset gen_two_moons(std::size_t n, double noise_sigma, std::uint64_t seed) {
    if (n < 2) throw DatasetError("two-moons: need n >= 2");
    if (noise_sigma < 0) throw DatasetError("two-moons: noise_sigma must be non-negative");
    Rng rng = make_rng(seed, "two-moons");
    std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
    std::normal_distribution<double> noise(0.0, 1.0);

    SemiDataset ds;
    ds.task = TaskKind::classification(2);
    ds.x = Matrix(n, 2);
    ds.y = Matrix(n, 1);
    const std::size_t n_a = n - n / 2;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = angle(rng);
        const bool moon_a = i < n_a;
        double px = moon_a ? std::cos(t) : 1.0 - std::cos(t);
        double py = moon_a ? std::sin(t) : 0.5 - std::sin(t);
        if (noise_sigma > 0) {
            px += noise_sigma * noise(rng);
            py += noise_sigma * noise(rng);
        }
        ds.x(i, 0) = px;
        ds.x(i, 1) = py;
        ds.y(i, 0) = moon_a ? 0.0 : 1.0;
    }
    ds.mask.assign(n, 1);
    ds.reindex();
    return ds;
}

std::vector<double> tabular_coefficients(std::size_t d, std::uint64_t seed) {
    Rng rng = make_rng(seed, "tabular-coef");
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> w(d);
    for (double& c : w) c = normal(rng);
    return w;
}

SemiDataset gen_tabular_regression(std::size_t n, std::size_t d, std::uint64_t seed, TabularOptions opt) {
    if (n < 1 || d < 1) throw DatasetError("tabular: need n >= 1 and d >= 1");
    const auto w = tabular_coefficients(d, seed);
    Rng coef = make_rng(seed, "tabular-nonlinear");
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> v(d);
    for (double& c : v) c = normal(coef) / std::sqrt(static_cast<double>(d));

    Rng rng = make_rng(seed, "tabular-samples");
    std::normal_distribution<double> eps(0.0, 0.1);
    SemiDataset ds;
    ds.task = TaskKind::regression(1);
    ds.x = Matrix(n, d);
    ds.y = Matrix(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        double lin = 0.0, proj = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double xij = normal(rng);
            ds.x(i, j) = xij;
            lin += xij * w[j];
            proj += xij * v[j];
        }
        const double e = eps(rng);
        ds.y(i, 0) = lin + (opt.nonlinear ? std::sin(proj) : 0.0) + (opt.noise ? e : 0.0);
    }
    ds.mask.assign(n, 1);
    ds.reindex();
    return ds;
}

// ---- masking and corruption ------------------------------------------------

SemiDataset apply_missing(SemiDataset ds, double rate, std::uint64_t seed) {
    if (!(rate >= 0.0 && rate < 1.0)) throw DatasetError(fmt::format("missing rate {} outside [0, 1)", rate));
    const std::size_t n = ds.size();
    const auto hide = static_cast<std::size_t>(std::floor(rate * static_cast<double>(n)));
    if (hide == 0) return ds;
    const std::size_t min_keep = ds.task.is_classification() ? ds.task.out_dim() : 1;
    if (hide > ds.labeled.size() || ds.labeled.size() - hide < min_keep) {
        throw DatasetError(fmt::format("missing rate {} leaves {} of {} labels; need at least {}", rate,
                                       ds.labeled.size() < hide ? 0 : ds.labeled.size() - hide, n, min_keep));
    }

    Rng rng = make_rng(seed, "missing");
    constexpr int kMaxDraws = 1000;
    for (int attempt = 0; attempt < kMaxDraws; ++attempt) {
        std::vector<std::size_t> order = ds.labeled;
        std::shuffle(order.begin(), order.end(), rng);
        auto mask = ds.mask;
        for (std::size_t i = 0; i < hide; ++i) mask[order[i]] = 0;
        if (ds.task.is_classification()) {
            std::vector<bool> seen(ds.task.out_dim(), false);
            for (std::size_t i = hide; i < order.size(); ++i) seen[static_cast<std::size_t>(ds.y(order[i], 0))] = true;
            if (std::find(seen.begin(), seen.end(), false) != seen.end()) continue;
        }
        ds.mask = std::move(mask);
        ds.reindex();
        std::erase_if(ds.noisy, [&](std::size_t i) { return !ds.mask[i]; });
        return ds;
    }
    throw DatasetError(fmt::format("missing rate {}: no draw keeps a label for every class", rate));
}

SemiDataset inject_label_noise(SemiDataset ds, double noise_rate, std::uint64_t seed) {
    if (!(noise_rate >= 0.0 && noise_rate < 1.0)) {
        throw DatasetError(fmt::format("noise rate {} outside [0, 1)", noise_rate));
    }
    const auto count = static_cast<std::size_t>(std::floor(noise_rate * static_cast<double>(ds.labeled.size())));
    if (count == 0) return ds;

    Rng rng = make_rng(seed, "label-noise");
    std::vector<std::size_t> order = ds.labeled;
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(count);

    if (ds.task.is_classification()) {
        const std::size_t k = ds.task.out_dim();
        std::uniform_int_distribution<std::size_t> other(1, k - 1);
        for (std::size_t i : order) {
            const auto orig = static_cast<std::size_t>(ds.y(i, 0));
            ds.y(i, 0) = static_cast<double>((orig + other(rng)) % k);
        }
    } else {
        for (std::size_t c = 0; c < ds.y.cols; ++c) {
            double mean = 0.0, sq = 0.0;
            for (std::size_t i : ds.labeled) mean += ds.y(i, c);
            mean /= static_cast<double>(ds.labeled.size());
            for (std::size_t i : ds.labeled) sq += (ds.y(i, c) - mean) * (ds.y(i, c) - mean);
            const double sd = std::sqrt(sq / static_cast<double>(ds.labeled.size()));
            for (std::size_t i : order) ds.y(i, c) += 5.0 * sd;
        }
    }
    ds.noisy.insert(ds.noisy.end(), order.begin(), order.end());
    std::sort(ds.noisy.begin(), ds.noisy.end());
    ds.noisy.erase(std::unique(ds.noisy.begin(), ds.noisy.end()), ds.noisy.end());
    return ds;
}

std::pair<SemiDataset, SemiDataset> split_rows(const SemiDataset& ds, std::size_t first) {
    if (first > ds.size()) throw DatasetError("split_rows: split point past the end");
    auto part = [&](std::size_t lo, std::size_t hi) {
        std::vector<std::size_t> idx(hi - lo);
        std::iota(idx.begin(), idx.end(), lo);
        SemiDataset out;
        out.task = ds.task;
        out.x = ds.x.select_rows(idx);
        out.y = ds.y.select_rows(idx);
        out.mask.assign(ds.mask.begin() + static_cast<std::ptrdiff_t>(lo), ds.mask.begin() + static_cast<std::ptrdiff_t>(hi));
        for (std::size_t i : ds.noisy)
            if (i >= lo && i < hi) out.noisy.push_back(i - lo);
        out.reindex();
        return out;
    };
    return {part(0, first), part(first, ds.size())};
}

// ---- CSV -------------------------------------------------------------------

namespace {
std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string trim(std::string s) {
    auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

double parse_cell(const std::string& cell, std::size_t line, const std::string& column) {
    const std::string t = trim(cell);
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(v)) {
        throw DatasetError(fmt::format("line {}, column '{}': non-numeric cell '{}'", line, column, cell));
    }
    return v;
}
}  // namespace

SemiDataset load_csv(const std::filesystem::path& path, std::optional<TaskKind> task) {
    std::ifstream in(path);
    if (!in) throw DatasetError(fmt::format("cannot open {}", path.string()));
    std::string line;
    if (!std::getline(in, line)) throw DatasetError(fmt::format("{}: missing header row", path.string()));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto header = split_csv_line(line);
    for (auto& h : header) h = trim(h);

    std::size_t d = 0;
    while (d < header.size() && header[d] == fmt::format("x{}", d)) ++d;
    if (d == 0) throw DatasetError(fmt::format("{}: header must start with x0", path.string()));
    if (header.size() != d + 2 || header[d] != "y" || header[d + 1] != "observed") {
        throw DatasetError(fmt::format("{}: header must be x0..x{},y,observed; got '{}'", path.string(), d - 1, line));
    }

    std::vector<double> xs, ys;
    std::vector<std::uint8_t> mask;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw DatasetError(fmt::format("line {}: expected {} columns, got {}", line_no, header.size(), cells.size()));
        }
        for (std::size_t j = 0; j < d; ++j) xs.push_back(parse_cell(cells[j], line_no, header[j]));
        ys.push_back(parse_cell(cells[d], line_no, "y"));
        const double obs = parse_cell(cells[d + 1], line_no, "observed");
        if (obs != 0.0 && obs != 1.0) {
            throw DatasetError(fmt::format("line {}, column 'observed': expected 0 or 1, got '{}'", line_no, cells[d + 1]));
        }
        mask.push_back(static_cast<std::uint8_t>(obs));
    }

    SemiDataset ds;
    const std::size_t n = mask.size();
    if (task) {
        if (task->label_cols() != 1) throw DatasetError("csv holds a single label column");
        ds.task = *task;
    } else {
        const bool integral = std::all_of(ys.begin(), ys.end(), [](double v) { return v >= 0 && v == std::floor(v); });
        if (integral && n > 0) {
            const auto k = static_cast<std::size_t>(*std::max_element(ys.begin(), ys.end())) + 1;
            ds.task = TaskKind::classification(std::max<std::size_t>(k, 2));
        } else {
            ds.task = TaskKind::regression(1);
        }
    }
    ds.x.rows = n;
    ds.x.cols = d;
    ds.x.data = std::move(xs);
    ds.y.rows = n;
    ds.y.cols = 1;
    ds.y.data = std::move(ys);
    ds.mask = std::move(mask);
    ds.reindex();
    ds.validate();
    return ds;
}

void save_csv(const SemiDataset& ds, const std::filesystem::path& path) {
    if (ds.y.cols != 1) throw DatasetError("save_csv: only single-label datasets fit the csv layout");
    std::ofstream out(path);
    if (!out) throw DatasetError(fmt::format("cannot write {}", path.string()));
    for (std::size_t j = 0; j < ds.features(); ++j) out << 'x' << j << ',';
    out << "y,observed\n";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (std::size_t j = 0; j < ds.features(); ++j) out << fmt::format("{:.17g},", ds.x(i, j));
        out << fmt::format("{:.17g},{}\n", ds.y(i, 0), static_cast<int>(ds.mask[i]));
    }
    if (!out) throw DatasetError(fmt::format("write failed for {}", path.string()));
}

}  // namespace flexssl
