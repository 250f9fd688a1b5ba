#include "flexssl/harness.hpp"

#include "flexssl/metrics.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

namespace flexssl {

namespace {

const std::set<std::string> kMethods{"supervised", "self-training", "flexssl"};

bool higher_is_better(const ExperimentSpec& spec) { return spec.dataset == "two-moons"; }

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt::format("{:.17g}", *v) : std::string(); }

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

std::filesystem::path prepare_out(const ExperimentSpec& spec) {
    std::filesystem::path dir(spec.out);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

// ---- spec ------------------------------------------------------------------

void ExperimentSpec::validate() const {
    if (dataset != "two-moons" && dataset != "tabular") {
        throw SpecError("unknown dataset '" + dataset + "' (expected two-moons or tabular)");
    }
    if (n < 2) throw SpecError("n must be at least 2");
    if (noise_sigma < 0) throw SpecError("noise-sigma must be non-negative");
    if (features < 1) throw SpecError("features must be at least 1");
    if (!(missing_rate >= 0.0 && missing_rate < 1.0)) throw SpecError(fmt::format("missing-rate {} outside [0, 1)", missing_rate));
    if (!(noise_rate >= 0.0 && noise_rate < 1.0)) throw SpecError(fmt::format("noise-rate {} outside [0, 1)", noise_rate));
    if (methods.empty()) throw SpecError("no method given");
    for (const auto& m : methods) {
        if (!kMethods.contains(m)) throw SpecError("unknown method '" + m + "' (expected supervised, self-training or flexssl)");
        if (m == "self-training" && dataset == "tabular") throw SpecError("self-training needs a classification dataset");
    }
    try {
        game.validate();
    } catch (const std::invalid_argument& e) {
        throw SpecError(e.what());
    }
    if (!(tau > 0.5 && tau <= 1.0)) throw SpecError(fmt::format("tau {} outside (0.5, 1]", tau));
    if (seeds.empty()) throw SpecError("no seeds given");
    if (!axis.empty()) {
        if (axis != "missing_rate" && axis != "alpha") throw SpecError("sweep axis must be missing_rate or alpha");
        if (values.empty()) throw SpecError("sweep needs at least one value");
        for (double v : values) {
            if (axis == "alpha" && !(v > 0.0 && v <= 1.0)) throw SpecError(fmt::format("alpha {} outside (0, 1]", v));
            if (axis == "missing_rate" && !(v >= 0.0 && v < 1.0)) throw SpecError(fmt::format("missing rate {} outside [0, 1)", v));
        }
    }
    for (std::size_t e : snapshots) {
        if (e > game.epochs) throw SpecError(fmt::format("snapshot epoch {} beyond {} epochs", e, game.epochs));
    }
}

nlohmann::json to_json(const ExperimentSpec& spec) {
    nlohmann::json j = {
        {"dataset", spec.dataset},         {"n", spec.n},
        {"noise_sigma", spec.noise_sigma}, {"features", spec.features},
        {"missing_rate", spec.missing_rate}, {"noise_rate", spec.noise_rate},
        {"method", spec.methods},          {"tau", spec.tau},
        {"seeds", spec.seeds},             {"out", spec.out},
        {"no_timing", spec.no_timing},
    };
    auto game = to_json(spec.game);
    game.erase("seed");
    j.update(game);
    if (!spec.axis.empty()) {
        j["axis"] = spec.axis;
        j["values"] = spec.values;
    }
    if (!spec.snapshots.empty()) j["snapshots"] = spec.snapshots;
    return j;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
    std::vector<std::uint64_t> out;
    auto parse_one = [&](std::string_view tok) {
        std::uint64_t v = 0;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || ptr != tok.data() + tok.size()) throw SpecError("bad seed '" + std::string(tok) + "'");
        return v;
    };
    std::string_view rest(s);
    while (!rest.empty()) {
        const auto comma = rest.find(',');
        std::string_view tok = rest.substr(0, comma);
        rest = comma == std::string_view::npos ? std::string_view() : rest.substr(comma + 1);
        if (tok.empty()) throw SpecError("empty seed in list '" + s + "'");
        const auto dash = tok.find('-');
        if (dash == std::string_view::npos) {
            out.push_back(parse_one(tok));
        } else {
            const auto lo = parse_one(tok.substr(0, dash));
            const auto hi = parse_one(tok.substr(dash + 1));
            if (hi < lo) throw SpecError("descending seed range '" + std::string(tok) + "'");
            for (auto v = lo; v <= hi; ++v) out.push_back(v);
        }
    }
    if (out.empty()) throw SpecError("no seeds given");
    return out;
}

ExperimentSpec apply_spec_json(ExperimentSpec spec, const nlohmann::json& j) {
    if (!j.is_object()) throw SpecError("spec must be a JSON object");
    static const std::set<std::string> game_keys{"alpha", "variant", "clip", "refresh_interval", "epochs",
                                                 "batch_size", "lr_f", "lr_d"};
    try {
        nlohmann::json game = to_json(spec.game);
        for (const auto& [key, value] : j.items()) {
            if (game_keys.contains(key)) {
                game[key] = value;
            } else if (key == "dataset") {
                spec.dataset = value.get<std::string>();
            } else if (key == "n") {
                spec.n = value.get<std::size_t>();
            } else if (key == "noise_sigma") {
                spec.noise_sigma = value.get<double>();
            } else if (key == "features") {
                spec.features = value.get<std::size_t>();
            } else if (key == "missing_rate") {
                spec.missing_rate = value.get<double>();
            } else if (key == "noise_rate") {
                spec.noise_rate = value.get<double>();
            } else if (key == "method") {
                spec.methods = value.is_array() ? value.get<std::vector<std::string>>()
                                                : std::vector<std::string>{value.get<std::string>()};
            } else if (key == "tau") {
                spec.tau = value.get<double>();
            } else if (key == "seeds") {
                spec.seeds = value.is_string() ? parse_seed_list(value.get<std::string>())
                                               : value.get<std::vector<std::uint64_t>>();
            } else if (key == "out") {
                spec.out = value.get<std::string>();
            } else if (key == "no_timing") {
                spec.no_timing = value.get<bool>();
            } else if (key == "axis") {
                spec.axis = value.get<std::string>();
            } else if (key == "values") {
                spec.values = value.get<std::vector<double>>();
            } else if (key == "snapshots") {
                spec.snapshots = value.get<std::vector<std::size_t>>();
            } else if (key == "jobs") {
                spec.jobs = value.get<std::size_t>();
            } else {
                throw SpecError("unknown spec field: " + key);
            }
        }
        spec.game = game_config_from_json(game);
    } catch (const nlohmann::json::exception& e) {
        throw SpecError(std::string("spec: ") + e.what());
    } catch (const SpecError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw SpecError(e.what());
    }
    return spec;
}

// ---- runs ------------------------------------------------------------------

RunDatasets make_datasets(const ExperimentSpec& spec, std::uint64_t seed) {
    RunDatasets out;
    if (spec.dataset == "two-moons") {
        out.train = gen_two_moons(spec.n, spec.noise_sigma, derive_seed(seed, "train"));
        out.test = gen_two_moons(spec.n, spec.noise_sigma, derive_seed(seed, "test"));
    } else {
        auto all = gen_tabular_regression(2 * spec.n, spec.features, seed);
        std::tie(out.train, out.test) = split_rows(all, spec.n);
    }
    out.train = apply_missing(std::move(out.train), spec.missing_rate, derive_seed(seed, "mask"));
    out.train = inject_label_noise(std::move(out.train), spec.noise_rate, derive_seed(seed, "noise"));
    return out;
}

double ArmResult::final_test_metric() const {
    if (run.history.empty() || !run.history.back().test_metric) {
        throw std::logic_error("run has no test metric");
    }
    return *run.history.back().test_metric;
}

namespace {

struct Job {
    ExperimentSpec spec;  // with the sweep value applied
    std::string method;
    std::uint64_t seed;
    std::optional<double> axis_value;
};

std::string run_id(const Job& job, const std::string& axis) {
    if (!job.axis_value) return fmt::format("{}-s{}", job.method, job.seed);
    return fmt::format("{}-s{}-{}{:g}", job.method, job.seed, axis, *job.axis_value);
}

ArmResult execute(const Job& job, const std::string& axis, GameObserver observer) {
    const auto& spec = job.spec;
    RunDatasets data = make_datasets(spec, job.seed);
    ArmResult arm{job.method, job.seed, job.axis_value, {}, {}};
    const bool timing = !spec.no_timing;
    const std::string id = run_id(job, axis);

    if (job.method == "flexssl") {
        GameConfig cfg = spec.game;
        cfg.seed = job.seed;
        RunOptions opt;
        opt.test = &data.test;
        opt.model = spec.model;
        opt.observer = std::move(observer);
        opt.run_id = id;
        opt.timing = timing;
        arm.run = run_game(cfg, data.train, opt);
    } else {
        MainModel f = build_run_model(data.train.task, data.train.features(), spec.model, job.seed);
        BaselineOptions opt{&data.test, id, timing};
        if (job.method == "supervised") {
            arm.run = train_supervised(std::move(f), data.train,
                                       {spec.game.epochs, spec.game.batch_size, spec.game.lr_f, job.seed}, opt);
        } else {
            arm.run = train_self_training(std::move(f), data.train,
                                          {spec.tau, spec.game.refresh_interval, spec.game.epochs, spec.game.batch_size,
                                           spec.game.lr_f, job.seed},
                                          opt);
        }
    }
    arm.train = std::move(data.train);
    return arm;
}

}  // namespace

std::vector<ArmResult> run_arms(const ExperimentSpec& spec, const ObserverFactory& observers) {
    spec.validate();
    std::vector<Job> jobs;
    std::vector<std::optional<double>> points;
    if (spec.axis.empty()) points.emplace_back();
    else points.assign(spec.values.begin(), spec.values.end());
    for (const auto& point : points) {
        ExperimentSpec s = spec;
        if (point) (spec.axis == "alpha" ? s.game.alpha : s.missing_rate) = *point;
        for (const auto& m : spec.methods)
            for (auto seed : spec.seeds) jobs.push_back({s, m, seed, point});
    }

    std::vector<std::optional<ArmResult>> results(jobs.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            try {
                GameObserver obs = observers ? observers(i, jobs[i].seed) : GameObserver{};
                results[i] = execute(jobs[i], spec.axis, std::move(obs));
            } catch (...) {
                std::lock_guard lock(failure_mu);
                if (!failure) failure = std::current_exception();
                next = jobs.size();
            }
        }
    };
    std::size_t threads = spec.jobs ? spec.jobs : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, jobs.size());
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);

    std::vector<ArmResult> out;
    out.reserve(results.size());
    for (auto& r : results) out.push_back(std::move(*r));
    return out;
}

std::vector<MethodSummary> summarize(const std::vector<ArmResult>& arms, const std::vector<std::string>& methods,
                                     bool higher) {
    std::vector<MethodSummary> rows;
    for (const auto& m : methods) {
        MethodSummary row{m, {}, 0.0, 0.0, false};
        for (const auto& a : arms)
            if (a.method == m) row.finals.push_back(a.final_test_metric());
        row.mean = mean_of(row.finals);
        row.std = sample_std(row.finals);
        rows.push_back(std::move(row));
    }
    if (!rows.empty()) {
        auto best = std::max_element(rows.begin(), rows.end(), [&](const auto& a, const auto& b) {
            return higher ? a.mean < b.mean : a.mean > b.mean;
        });
        for (auto& r : rows) r.win = r.mean == best->mean;
    }
    return rows;
}

nlohmann::json summary_json(const std::vector<MethodSummary>& rows, bool higher) {
    nlohmann::json methods = nlohmann::json::array();
    for (const auto& r : rows) {
        methods.push_back({{"method", r.method}, {"mean", r.mean}, {"std", r.std}, {"finals", r.finals}, {"win", r.win}});
    }
    return {{"metric", higher ? "accuracy" : "mse"}, {"higher_is_better", higher}, {"methods", methods}};
}

void write_metrics_csv(std::ostream& out, const std::vector<ArmResult>& arms, bool timing, const std::string& axis) {
    if (!axis.empty()) out << "axis,value,";
    out << "run_id,method,seed,epoch,loss_A,loss_B,test_metric,pseudo_acc,mean_p_labeled,mean_p_unlabeled,auc_p_mask,"
           "wall_ms\n";
    for (const auto& a : arms) {
        for (const auto& m : a.run.history) {
            if (!axis.empty()) fmt::print(out, "{},{},", axis, a.axis_value ? fmt::format("{}", *a.axis_value) : std::string());
            fmt::print(out, "{},{},{},{},{:.17g},{},{},{},{},{},{},{}\n", m.run_id, m.method, m.seed, m.epoch, m.loss_a,
                       fmt_opt(m.loss_b), fmt_opt(m.test_metric), fmt_opt(m.pseudo_acc), fmt_opt(m.mean_p_labeled),
                       fmt_opt(m.mean_p_unlabeled), fmt_opt(m.auc_p_mask),
                       timing ? fmt::format("{:.3f}", m.wall_ms) : std::string());
        }
    }
}

std::vector<std::size_t> histogram20(std::span<const double> p) {
    std::vector<std::size_t> counts(20, 0);
    for (double v : p) {
        const auto bin = static_cast<std::size_t>(std::clamp(v, 0.0, 1.0) * 20.0);
        ++counts[std::min<std::size_t>(bin, 19)];
    }
    return counts;
}

// ---- commands --------------------------------------------------------------

TrainOutput cmd_train(const ExperimentSpec& spec) {
    TrainOutput result{run_arms(spec)};
    const auto dir = prepare_out(spec);
    std::ofstream csv(dir / "metrics.csv", std::ios::binary);
    write_metrics_csv(csv, result.arms, !spec.no_timing);
    for (const auto& a : result.arms) {
        write_text(dir / fmt::format("model_{}_seed{}.json", a.method, a.seed), a.run.model.to_json().dump(2) + "\n");
    }
    return result;
}

CompareOutput cmd_compare(const ExperimentSpec& spec) {
    CompareOutput result;
    result.arms = run_arms(spec);
    const bool higher = higher_is_better(spec);
    result.summary = summarize(result.arms, spec.methods, higher);
    const auto dir = prepare_out(spec);
    std::ofstream csv(dir / "metrics.csv", std::ios::binary);
    write_metrics_csv(csv, result.arms, !spec.no_timing);
    auto j = summary_json(result.summary, higher);
    j["spec"] = to_json(spec);
    write_text(dir / "summary.json", j.dump(2) + "\n");
    return result;
}

SweepOutput cmd_sweep(const ExperimentSpec& spec) {
    if (spec.axis.empty()) throw SpecError("sweep needs an axis (missing_rate or alpha)");
    SweepOutput result;
    result.values = spec.values;
    result.arms = run_arms(spec);
    const bool higher = higher_is_better(spec);
    nlohmann::json points = nlohmann::json::array();
    for (double v : spec.values) {
        std::vector<ArmResult> subset;
        for (const auto& a : result.arms)
            if (a.axis_value && *a.axis_value == v) subset.push_back(a);
        result.summary.push_back(summarize(subset, spec.methods, higher));
        auto j = summary_json(result.summary.back(), higher);
        j["value"] = v;
        points.push_back(std::move(j));
    }
    const auto dir = prepare_out(spec);
    std::ofstream csv(dir / "sweep.csv", std::ios::binary);
    write_metrics_csv(csv, result.arms, !spec.no_timing, spec.axis);
    nlohmann::json summary = {{"axis", spec.axis}, {"points", points}, {"spec", to_json(spec)}};
    write_text(dir / "summary.json", summary.dump(2) + "\n");
    return result;
}

DumpOutput cmd_dump_discriminator(const ExperimentSpec& spec) {
    for (const auto& m : spec.methods) {
        if (m != "flexssl") throw SpecError("dump-discriminator runs the flexssl method only");
    }
    if (spec.snapshots.empty()) throw SpecError("dump-discriminator needs at least one snapshot epoch");
    spec.validate();
    const std::set<std::size_t> wanted(spec.snapshots.begin(), spec.snapshots.end());

    std::vector<std::vector<Snapshot>> per_run(spec.seeds.size() * spec.methods.size());
    ObserverFactory factory = [&](std::size_t slot, std::uint64_t seed) -> GameObserver {
        return [&, slot, seed](std::size_t epoch, std::span<const double> p) {
            if (!wanted.contains(epoch)) return;
            per_run[slot].push_back({seed, epoch, {p.begin(), p.end()}, histogram20(p)});
        };
    };
    DumpOutput result;
    result.arms = run_arms(spec, factory);

    const auto dir = prepare_out(spec);
    nlohmann::json hist = nlohmann::json::array();
    std::vector<double> edges(21);
    for (std::size_t b = 0; b <= 20; ++b) edges[b] = static_cast<double>(b) / 20.0;
    for (std::size_t slot = 0; slot < per_run.size(); ++slot) {
        const auto& train = result.arms[slot].train;
        std::vector<bool> noisy(train.size(), false);
        for (std::size_t i : train.noisy) noisy[i] = true;
        std::vector<std::size_t> clean_labeled;
        for (std::size_t i : train.labeled)
            if (!noisy[i]) clean_labeled.push_back(i);
        for (auto& snap : per_run[slot]) {
            std::string csv = "index,p,observed,noisy\n";
            for (std::size_t i = 0; i < snap.p.size(); ++i) {
                csv += fmt::format("{},{:.17g},{},{}\n", i, snap.p[i], static_cast<int>(train.mask[i]), noisy[i] ? 1 : 0);
            }
            write_text(dir / fmt::format("p_seed{}_epoch{}.csv", snap.seed, snap.epoch), csv);
            nlohmann::json h = {{"seed", snap.seed}, {"epoch", snap.epoch}, {"edges", edges}, {"counts", snap.counts}};
            auto put = [&](const char* key, std::span<const std::size_t> idx) {
                if (auto m = mean_at(snap.p, idx)) h[key] = *m;
                else h[key] = nullptr;
            };
            put("mean_p_clean_labeled", clean_labeled);
            put("mean_p_noisy", train.noisy);
            put("mean_p_unlabeled", train.unlabeled);
            hist.push_back(std::move(h));
            result.snapshots.push_back(std::move(snap));
        }
    }
    write_text(dir / "histograms.json", hist.dump(2) + "\n");
    std::ofstream csv(dir / "metrics.csv", std::ios::binary);
    write_metrics_csv(csv, result.arms, !spec.no_timing);
    return result;
}

}  // namespace flexssl
