// flexssl: experiment driver for the soft-labeling semi-supervised game.
//
//   flexssl train   --dataset two-moons --missing-rate 0.9 --epochs 300 --out runs/a
//   flexssl compare --method supervised,self-training,flexssl --seeds 0-4 --out runs/b
//   flexssl sweep   --axis alpha --values 0.1,0.3,0.5,0.7,0.9 --out runs/c
//   flexssl dump-discriminator --noise-rate 0.1 --snapshots 0,100,300 --out runs/d
//
// Exit codes: 0 ok, 2 invalid spec, 3 training diverged.

#include "flexssl/harness.hpp"

#include "CLI11.hpp"

#include <fmt/format.h>

#include <fstream>
#include <iostream>

using namespace flexssl;

namespace {

struct Flags {
    ExperimentSpec spec;
    std::string methods;
    std::string variant = "bce";
    std::string seeds = "0";
    std::string spec_file;
    std::vector<double> values;
    std::vector<std::size_t> snapshots;
};

void add_common(CLI::App* cmd, Flags& f) {
    auto& s = f.spec;
    cmd->add_option("--dataset", s.dataset, "two-moons or tabular")->capture_default_str();
    cmd->add_option("--n", s.n, "training rows (test set has the same size)")->capture_default_str();
    cmd->add_option("--noise-sigma", s.noise_sigma, "two-moons coordinate noise")->capture_default_str();
    cmd->add_option("--features", s.features, "tabular feature count")->capture_default_str();
    cmd->add_option("--missing-rate", s.missing_rate, "fraction of labels hidden")->capture_default_str();
    cmd->add_option("--noise-rate", s.noise_rate, "fraction of observed labels corrupted")->capture_default_str();
    cmd->add_option("--method", f.methods, "comma list of supervised, self-training, flexssl");
    cmd->add_option("--alpha", s.game.alpha, "weight of the reweighting term")->capture_default_str();
    cmd->add_option("--variant", f.variant, "discriminator loss: bce, exp or logistic")->capture_default_str();
    cmd->add_option("--clip", s.game.clip, "clip bound H")->capture_default_str();
    cmd->add_option("--epochs", s.game.epochs)->capture_default_str();
    cmd->add_option("--refresh-interval", s.game.refresh_interval, "epochs between pseudo-label rounds")
        ->capture_default_str();
    cmd->add_option("--tau", s.tau, "self-training confidence threshold")->capture_default_str();
    cmd->add_option("--lr-f", s.game.lr_f)->capture_default_str();
    cmd->add_option("--lr-d", s.game.lr_d)->capture_default_str();
    cmd->add_option("--batch-size", s.game.batch_size)->capture_default_str();
    cmd->add_option("--seeds", f.seeds, "e.g. 0,1,2 or 0-4")->capture_default_str();
    cmd->add_option("--out", s.out, "output directory")->capture_default_str();
    cmd->add_flag("--no-timing", s.no_timing, "leave wall_ms empty so outputs are byte-reproducible");
    cmd->add_option("--jobs", s.jobs, "worker threads (0 = all cores)")->capture_default_str();
    cmd->add_option("--spec", f.spec_file, "JSON spec file; its keys override flags");
}

std::vector<std::string> split_methods(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        auto comma = s.find(',', start);
        if (comma == std::string::npos) comma = s.size();
        if (comma > start) out.push_back(s.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

ExperimentSpec finish(Flags& f, std::vector<std::string> default_methods) {
    ExperimentSpec spec = f.spec;
    spec.methods = f.methods.empty() ? std::move(default_methods) : split_methods(f.methods);
    try {
        spec.game.variant = parse_variant(f.variant);
    } catch (const std::invalid_argument& e) {
        throw SpecError(e.what());
    }
    spec.seeds = parse_seed_list(f.seeds);
    if (!f.values.empty()) spec.values = f.values;
    if (!f.snapshots.empty()) spec.snapshots = f.snapshots;
    if (!f.spec_file.empty()) {
        std::ifstream in(f.spec_file);
        if (!in) throw SpecError("cannot open spec file " + f.spec_file);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw SpecError(fmt::format("{}: {}", f.spec_file, e.what()));
        }
        spec = apply_spec_json(std::move(spec), j);
    }
    spec.validate();
    return spec;
}

void print_summary(const std::vector<MethodSummary>& rows) {
    for (const auto& r : rows) {
        fmt::print("  {:<14} mean {:.4f}  std {:.4f}{}\n", r.method, r.mean, r.std, r.win ? "  *" : "");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"semi-supervised soft-labeling game: experiments and baselines"};
    app.require_subcommand(1);

    Flags flags;
    auto* train = app.add_subcommand("train", "one run per seed; metrics CSV and final model JSON");
    auto* compare = app.add_subcommand("compare", "all methods over all seeds; metrics CSV and summary JSON");
    auto* sweep = app.add_subcommand("sweep", "compare at every value of one axis; long-format CSV");
    auto* dump = app.add_subcommand("dump-discriminator", "per-sample discriminator outputs at snapshot epochs");
    for (auto* cmd : {train, compare, sweep, dump}) add_common(cmd, flags);
    sweep->add_option("--axis", flags.spec.axis, "missing_rate or alpha");
    sweep->add_option("--values", flags.values, "sweep points")->delimiter(',');
    dump->add_option("--snapshots", flags.snapshots, "epochs to snapshot (0 = before training)")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (train->parsed()) {
            auto spec = finish(flags, {"flexssl"});
            auto out = cmd_train(spec);
            fmt::print("wrote {} run(s) to {}\n", out.arms.size(), spec.out);
        } else if (compare->parsed()) {
            auto spec = finish(flags, {"supervised", "self-training", "flexssl"});
            auto out = cmd_compare(spec);
            fmt::print("final test metric over {} seed(s):\n", spec.seeds.size());
            print_summary(out.summary);
        } else if (sweep->parsed()) {
            auto spec = finish(flags, {"supervised", "self-training", "flexssl"});
            auto out = cmd_sweep(spec);
            for (std::size_t i = 0; i < out.values.size(); ++i) {
                fmt::print("{} = {:g}\n", spec.axis, out.values[i]);
                print_summary(out.summary[i]);
            }
        } else if (dump->parsed()) {
            auto spec = finish(flags, {"flexssl"});
            auto out = cmd_dump_discriminator(spec);
            fmt::print("wrote {} snapshot(s) to {}\n", out.snapshots.size(), spec.out);
        }
    } catch (const SpecError& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 2;
    } catch (const DatasetError& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 2;
    } catch (const DivergenceError& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
    return 0;
}
