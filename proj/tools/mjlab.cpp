#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mjlab/gradcheck.hpp"
#include "mjlab/harness.hpp"
#include "mjlab/records.hpp"

using namespace mjlab;
using nlohmann::json;

namespace {

struct CommonOptions {
    std::string config_path;
    std::string profile;
    int games = -1;
    long long seed = -1;
    int threads = 0;
    std::string out;
};

void add_common(CLI::App* app, CommonOptions& o) {
    app->add_option("-c,--config", o.config_path, "JSON config file");
    app->add_option("-p,--profile", o.profile, "named profile (default, paper-2025-deployment)");
    app->add_option("-n,--games", o.games, "number of games");
    app->add_option("-s,--seed", o.seed, "base seed");
    app->add_option("-j,--threads", o.threads, "worker threads");
    app->add_option("-o,--out", o.out, "output directory");
}

ExperimentConfig build_config(const CommonOptions& o) {
    json j = json::object();
    if (!o.config_path.empty()) {
        std::ifstream in(o.config_path);
        if (!in) throw std::runtime_error("cannot read config " + o.config_path);
        j = json::parse(in);
    }
    if (!o.profile.empty()) j["profile"] = o.profile;
    if (o.games >= 0) {
        j["games"] = o.games;
        j.erase("seeds");
    }
    if (o.seed >= 0) j["base_seed"] = o.seed;
    if (o.threads > 0) j["parallelism"] = o.threads;
    if (!o.out.empty()) j["output_dir"] = o.out;
    ExperimentConfig c = config_from_json(j);
    c.output_dir = resolve_output_dir(c.output_dir);
    return c;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

SeatAssignment seat_from_arg(const std::string& arg) {
    SeatAssignment s;
    if (arg == "teacher" || arg == "uniform") {
        s.kind = arg;
        return s;
    }
    if (arg == "initial") {
        s.kind = "softmax";
        s.params = initial_params();
        return s;
    }
    std::ifstream in(arg);
    if (!in) throw std::runtime_error("policy must be teacher, uniform, initial or a params file: " + arg);
    s.kind = "softmax";
    const json j = json::parse(in);
    s.params = params_from_json(j.contains("final") ? j.at("final") : j);
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sichuan mahjong robot simulation lab"};
    app.require_subcommand(0, 1);
    bool print_config = false;
    std::string print_profile = "default";
    app.add_flag("--print-config", print_config, "print the configuration with all defaults and exit");
    app.add_option("--print-profile", print_profile, "profile used by --print-config");

    CommonOptions sim_opts;
    bool transcripts = false;
    auto* simulate = app.add_subcommand("simulate", "run a seeded campaign");
    add_common(simulate, sim_opts);
    simulate->add_flag("--transcripts", transcripts, "write one transcript per game");

    CommonOptions pair_opts;
    std::string policy_a = "initial", policy_b = "teacher";
    int matches = 100;
    auto* paired = app.add_subcommand("paired", "paired matches with swapped seats");
    add_common(paired, pair_opts);
    paired->add_option("-a,--policy-a", policy_a, "teacher, uniform, initial or a params file");
    paired->add_option("-b,--policy-b", policy_b, "teacher, uniform, initial or a params file");
    paired->add_option("-m,--matches", matches, "number of deals");

    CommonOptions abl_opts;
    std::string ablation = "recovery-off";
    auto* ablate = app.add_subcommand("ablate", "baseline against one ablation on shared seeds");
    add_common(ablate, abl_opts);
    ablate->add_option("-k,--kind", ablation, "recovery-off, commit-before-verify or forced-characters");

    SelfPlayConfig sp;
    std::string sp_out = "out";
    long long sp_seed = 1;
    std::string kl = "exact-reverse";
    auto* selfplay = app.add_subcommand("selfplay", "trie self-play with DPO updates");
    selfplay->add_option("-r,--rounds", sp.rounds, "self-play rounds");
    selfplay->add_option("-g,--groups", sp.groups_per_round, "groups per round");
    selfplay->add_option("--group-size", sp.group_size, "games per group");
    selfplay->add_option("-m,--matches", sp.eval_matches, "paired matches for evaluation");
    selfplay->add_option("--lr", sp.train.learning_rate, "DPO learning rate");
    selfplay->add_option("--steps", sp.train.steps, "gradient steps per round");
    selfplay->add_option("--beta", sp.train.beta_sp, "DPO beta");
    selfplay->add_option("--kl", kl, "KL mode recorded in the loss config");
    selfplay->add_option("-s,--seed", sp_seed, "seed");
    selfplay->add_option("-o,--out", sp_out, "output directory");

    long long gc_seed = 1;
    int gc_instances = 100;
    double gc_step = 1e-5;
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference checks of every loss");
    gradcheck->add_option("-s,--seed", gc_seed, "seed");
    gradcheck->add_option("-n,--instances", gc_instances, "instances per loss");
    gradcheck->add_option("--step", gc_step, "central-difference step");

    std::string report_dir;
    auto* report = app.add_subcommand("report", "re-render saved transcripts");
    report->add_option("dir", report_dir, "directory holding transcripts (default: output directory)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (print_config) {
            auto c = named_profile(print_profile);
            if (!c) throw std::runtime_error("unknown profile " + print_profile);
            c->output_dir = resolve_output_dir(c->output_dir);
            std::cout << config_to_json(*c).dump(2) << "\n";
            return 0;
        }
        if (simulate->parsed()) {
            ExperimentConfig c = build_config(sim_opts);
            c.write_transcripts = c.write_transcripts || transcripts;
            const CampaignReport r = run_campaign(c).report;
            write_report(r, c.output_dir);
            std::cout << render_report(r);
            std::cout << "wrote " << c.output_dir << "\n";
            return r.failures.empty() ? 0 : 1;
        }
        if (paired->parsed()) {
            const ExperimentConfig c = build_config(pair_opts);
            std::vector<std::uint64_t> deals;
            for (int i = 0; i < matches; ++i) deals.push_back(c.base_seed + static_cast<std::uint64_t>(i));
            const PairedSummary s = run_paired_matches(seat_from_arg(policy_a), seat_from_arg(policy_b), deals, c);
            const json out{{"matches", s.total()}, {"win_a", s.win_a}, {"win_b", s.win_b}, {"draws", s.draws},
                           {"rate_a", s.rate_a()}};
            write_text(std::filesystem::path(c.output_dir) / "paired.json", out.dump(2) + "\n");
            std::cout << out.dump(2) << "\n";
            return 0;
        }
        if (ablate->parsed()) {
            const ExperimentConfig c = build_config(abl_opts);
            const auto kind = parse_ablation(ablation);
            if (!kind) throw std::runtime_error("unknown ablation " + ablation);
            const AblationReport r = run_ablation(*kind, c, static_cast<int>(c.seed_list().size()));
            const json out = ablation_to_json(r);
            write_text(std::filesystem::path(c.output_dir) / ("ablation_" + ablation + ".json"), out.dump(2) + "\n");
            std::cout << out.dump(2) << "\n";
            return 0;
        }
        if (selfplay->parsed()) {
            auto mode = parse_kl_mode(kl);
            if (!mode) throw std::runtime_error("unknown KL mode " + kl);
            sp.loss.kl_mode = *mode;
            sp.seed = static_cast<std::uint64_t>(sp_seed);
            SeatAssignment teacher;
            const SelfPlayReport r = selfplay_round(initial_params(), teacher, sp);
            const json out = selfplay_to_json(r);
            write_text(std::filesystem::path(resolve_output_dir(sp_out)) / "selfplay.json", out.dump(2) + "\n");
            std::cout << out.dump(2) << "\n";
            return 0;
        }
        if (gradcheck->parsed()) {
            const GradcheckReport r = run_gradcheck(static_cast<std::uint64_t>(gc_seed), gc_instances, gc_step);
            json grpo = json::object();
            for (const auto& [m, e] : r.worst_grpo) grpo[std::string(kl_mode_name(m))] = e;
            const json out{{"instances", r.instances}, {"sft", r.worst_sft}, {"dpo", r.worst_dpo},
                           {"grpo", grpo},             {"finite", r.all_finite}};
            std::cout << out.dump(2) << "\n";
            return r.all_finite && r.worst() < 1e-4 ? 0 : 1;
        }
        if (report->parsed()) {
            const std::string dir = report_dir.empty() ? resolve_output_dir("out") : report_dir;
            std::filesystem::path tdir = std::filesystem::path(dir) / "transcripts";
            if (!std::filesystem::is_directory(tdir)) tdir = dir;
            std::vector<std::filesystem::path> files;
            for (const auto& e : std::filesystem::directory_iterator(tdir)) {
                if (e.path().extension() == ".jsonl") files.push_back(e.path());
            }
            std::vector<GameSummary> games;
            std::string profile = "unknown";
            for (const auto& f : files) {
                std::ifstream in(f);
                std::stringstream buf;
                buf << in.rdbuf();
                const std::string text = buf.str();
                const json first = json::parse(text.substr(0, text.find('\n')));
                profile = first.value("profile", profile);
                games.push_back(summary_from_transcript(text));
            }
            std::sort(games.begin(), games.end(), [](const GameSummary& a, const GameSummary& b) { return a.seed < b.seed; });
            std::cout << render_report(aggregate(games, profile));
            return 0;
        }
        std::cout << app.help();
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
