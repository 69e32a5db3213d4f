// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Criterion 12 runs the CLI end to end; 6 and 7 read the
// artifacts of that run.

#include <boost/math/distributions/chi_squared.hpp>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>

#include "commands.hpp"
#include "physpref/bench.hpp"
#include "physpref/checkpoint.hpp"
#include "physpref/conditioning.hpp"
#include "physpref/dpo.hpp"
#include "physpref/error.hpp"
#include "physpref/flow.hpp"
#include "physpref/hashing.hpp"
#include "physpref/io.hpp"
#include "physpref/judge.hpp"
#include "physpref/pipeline.hpp"
#include "physpref/stats.hpp"
#include "run_context.hpp"
#include "test_support.hpp"

using namespace physpref;
namespace fs = std::filesystem;
namespace pt = physpref::testing;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = false;
    std::string detail;
};

// Collects failed checks; the first few are reported.
class Checks {
public:
    void expect(bool ok, const std::string& what) {
        if (ok) return;
        if (failures_.size() < 4) failures_.push_back(what);
        ++failed_;
    }
    bool ok() const { return failed_ == 0; }
    Outcome outcome(std::string summary) const {
        if (ok()) return {true, std::move(summary)};
        std::string d = std::to_string(failed_) + " failed check(s): ";
        for (std::size_t i = 0; i < failures_.size(); ++i) d += (i ? "; " : "") + failures_[i];
        return {false, d};
    }

private:
    std::vector<std::string> failures_;
    std::size_t failed_ = 0;
};

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double x, int precision = 4) {
    std::ostringstream os;
    os.precision(precision);
    os << x;
    return os.str();
}

// ---- 1 ----------------------------------------------------------------------

Outcome pipeline_rules() {
    const auto start = Clock::now();
    Checks c;
    const SplitFractions fractions{0.7, 0.15, 0.15};
    std::string first_manifest;
    std::size_t n_pairs = 0;
    for (int run = 0; run < 2; ++run) {
        const auto records = ingest_ratings(pt::fixture("ratings_small.jsonl"));
        const auto t0 = run_t0(records);
        const auto kept = keep_raters(records, t0.qc.retained_raters);
        T1Stats stats;
        const auto pairs = t1_enumerate_pairs(t0.videos, 1.0, 2, &stats);
        std::vector<pt::PairTriple> got;
        for (const auto& p : pairs) got.emplace_back(p.group_id, p.winner, p.loser);
        std::sort(got.begin(), got.end());
        c.expect(got == pt::brute_force_t1(kept, 1.0, 2), "T1 pair set differs from exhaustive search");
        c.expect(!got.empty(), "fixture admits no pairs");
        n_pairs = pairs.size();

        const auto split = t1_split_prompts(pairs, fractions, 20260101);
        std::set<std::string> seen;
        for (const auto* part : {&split.train_prompts, &split.val_prompts, &split.heldout_prompts}) {
            for (const auto& p : *part) c.expect(seen.insert(p).second, "prompt " + p + " in two splits");
        }
        const auto in = [](const std::vector<std::string>& v, const std::string& p) {
            return std::binary_search(v.begin(), v.end(), p);
        };
        for (const auto& p : split.train) c.expect(in(split.train_prompts, p.prompt_id), "train pair off its split");
        for (const auto& p : split.val) c.expect(in(split.val_prompts, p.prompt_id), "val pair off its split");
        for (const auto& p : split.heldout) {
            c.expect(in(split.heldout_prompts, p.prompt_id), "heldout pair off its split");
        }
        c.expect(split.train.size() + split.val.size() + split.heldout.size() == pairs.size(), "split loses pairs");

        const auto manifest = make_t1_manifest(pairs, split, stats, Json{{"seed", 20260101}}).serialize();
        if (run == 0) first_manifest = manifest;
        else c.expect(manifest == first_manifest, "T1 manifests differ between runs");
    }
    const double secs = seconds_since(start);
    c.expect(secs < 10.0, "runtime " + fmt(secs) + " s");
    return c.outcome(std::to_string(n_pairs) + " pairs equal the oracle, disjoint splits, identical manifests, " +
                     fmt(secs, 3) + " s");
}

// ---- 2 ----------------------------------------------------------------------

Outcome quota_exactness() {
    Checks c;
    const auto quotas = reference_quotas();
    const std::map<EventClass, std::size_t> expected = {
        {EventClass::A, 513}, {EventClass::B, 93}, {EventClass::C, 168}, {EventClass::D, 68},
        {EventClass::E, 13},  {EventClass::F, 75}, {EventClass::G, 55},  {EventClass::Unclassified, 15}};
    c.expect(quotas == expected, "reference quotas differ from the class budget");
    QuotaMap sizes = quotas;
    for (auto& [cls, n] : sizes) n += 11;
    const auto pool = pt::class_pool(sizes);
    const auto r = t3_quota_sample(pool, quotas, 5);
    std::map<EventClass, std::size_t> got;
    for (const auto& p : r.subset) ++got[p.event_class];
    for (const auto& [cls, n] : expected) {
        c.expect(got[cls] == n, std::string(to_string(cls)) + " sampled " + std::to_string(got[cls]));
    }
    c.expect(r.subset.size() == 1000, "total " + std::to_string(r.subset.size()));

    for (const auto& [short_cls, n] : expected) {
        auto lacking = quotas;
        lacking[short_cls] = n - 1;
        try {
            t3_quota_sample(pt::class_pool(lacking), quotas, 5);
            c.expect(false, "short class " + std::string(to_string(short_cls)) + " accepted");
        } catch (const SelectionError& e) {
            const std::string msg = e.what();
            c.expect(msg.find("'" + std::string(to_string(short_cls)) + "'") != std::string::npos ||
                         msg.find(std::string(to_string(short_cls))) != std::string::npos,
                     "error does not name " + std::string(to_string(short_cls)) + ": " + msg);
        }
    }
    return c.outcome("1000 = 513+93+168+68+13+75+55+15; each short class named");
}

// ---- 3 ----------------------------------------------------------------------

Outcome dpo_identity() {
    Checks c;
    const DenoiserConfig cfg;
    ToyDenoiser model(cfg, 3);
    const auto examples = pt::random_examples(cfg, 100, 4);
    SplitMix64 rng(5);
    double worst_delta = 0.0, worst_loss = 0.0;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const auto& ex = examples[i];
        const auto eps_w = gaussian_like(ex.x1_w.shape(), rng);
        const auto eps_l = i % 2 == 0 ? eps_w : gaussian_like(ex.x1_w.shape(), rng);
        const auto spec = i % 3 == 0 ? TimestepSpec::logit_normal() : TimestepSpec::window();
        const double tau = sample_timestep(rng, spec).tau;
        const auto e = evaluate_pair(model, ex, eps_w, eps_l, tau, 100.0);
        worst_delta = std::max(worst_delta, std::abs(e.dpo.delta));
        worst_loss = std::max(worst_loss, std::abs(e.dpo.loss - std::log(2.0)));
    }
    const auto val = make_validation_set(examples, 6);
    const auto point = evaluate_validation(model, val, 100.0);
    worst_delta = std::max(worst_delta, std::abs(point.mean_margin));
    worst_loss = std::max(worst_loss, std::abs(point.loss - std::log(2.0)));
    c.expect(worst_delta <= std::numeric_limits<double>::epsilon(), "max |delta| " + fmt(worst_delta));
    c.expect(worst_loss <= 1e-9, "max |loss - ln 2| " + fmt(worst_loss));
    return c.outcome("max |delta| " + fmt(worst_delta) + ", max |loss - ln 2| " + fmt(worst_loss));
}

// ---- 4 ----------------------------------------------------------------------

Outcome gradient_fidelity() {
    const auto start = Clock::now();
    Checks c;
    const auto cfg = pt::tiny_config();
    double worst_dpo = 0.0, worst_fm = 0.0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        ToyDenoiser model(cfg, 100 + seed);
        pt::perturb_adapter(model, 200 + seed, 0.05);
        const auto ex = pt::random_examples(cfg, 1, 300 + seed).front();
        SplitMix64 rng(400 + seed);
        const auto eps = gaussian_like(ex.x1_w.shape(), rng);
        const double tau = sample_timestep(rng, TimestepSpec::window()).tau;
        const double beta = 100.0;

        auto grads = model.make_gradients();
        grads.zero();
        const auto e = dpo_pair_loss_and_grad(model, ex, eps, eps, tau, beta, {false, true, true}, grads);
        const auto full = [&] { return evaluate_pair(model, ex, eps, eps, tau, beta).dpo.loss; };
        worst_dpo = std::max(worst_dpo, pt::central_difference_error(model.adapter().factors(), grads.adapter, full));
        // The reference errors are constants of the objective.
        const auto ref = e.ref;
        const auto policy_only = [&] {
            const auto pi = pair_mse(model, ex, eps, eps, tau);
            return dpo_loss(pi.w, pi.l, ref.w, ref.l, beta).loss;
        };
        const auto ctx = model.layout().group_mask(ParamGroup::ContextMlp);
        const Eigen::VectorXd ctx_grad = grads.base.cwiseProduct(ctx);
        worst_dpo = std::max(worst_dpo, pt::central_difference_error(model.theta(), ctx_grad, policy_only));

        const auto x0 = gaussian_like(ex.x1_w.shape(), rng);
        const double fm_tau = sample_timestep(rng, TimestepSpec::logit_normal()).tau;
        const auto xt = interpolate(x0, ex.x1_w, fm_tau);
        const auto v = velocity_target(x0, ex.x1_w);
        grads.zero();
        fm_loss_and_grad(model, xt, ex.cond, fm_tau, v, {true, true, true}, grads);
        const auto fm = [&] { return fm_loss(model, xt, ex.cond, fm_tau, v); };
        worst_fm = std::max(worst_fm, pt::central_difference_error(model.theta(), grads.base, fm, 10, 1e-5));
        worst_fm = std::max(worst_fm,
                            pt::central_difference_error(model.adapter().factors(), grads.adapter, fm, 10, 1e-5));
    }
    const double secs = seconds_since(start);
    c.expect(worst_dpo <= 1e-3, "DPO relative error " + fmt(worst_dpo));
    c.expect(worst_fm <= 1e-4, "FM relative error " + fmt(worst_fm));
    c.expect(secs < 60.0, "runtime " + fmt(secs) + " s");
    return c.outcome("DPO " + fmt(worst_dpo) + " <= 1e-3, FM " + fmt(worst_fm) + " <= 1e-4, " + fmt(secs, 3) + " s");
}

// ---- 5 ----------------------------------------------------------------------

Outcome step_accounting() {
    Checks c;
    const auto cfg = pt::tiny_config();
    ToyDenoiser model(cfg, 7);
    const auto train = pt::random_examples(cfg, 1000, 8);
    const auto val = make_validation_set(pt::random_examples(cfg, 4, 9), 10);
    DPOConfig dc;
    dc.epochs = 2;
    dc.eval_every = 1000;
    c.expect(dc.effective_batch() == 8, "effective batch " + std::to_string(dc.effective_batch()));
    std::int64_t callbacks = 0;
    const auto report = train_dpo(model, dc, train, val, [&](std::int64_t, const ToyDenoiser&) { ++callbacks; });
    c.expect(report.steps_per_epoch == 125, "steps per epoch " + std::to_string(report.steps_per_epoch));
    c.expect(report.steps == 250, "steps " + std::to_string(report.steps));
    c.expect(callbacks == 250, "optimizer callbacks " + std::to_string(callbacks));
    c.expect(report.train_loss.size() == 250, "loss entries " + std::to_string(report.train_loss.size()));
    return c.outcome("125 steps per epoch, 250 over two epochs");
}

// ---- 12, then 6 and 7 on its artifacts ---------------------------------------

const std::vector<std::string> kChain = {"toygen", "curate", "pipeline", "train-fm", "train-dpo", "evaluate"};

struct SmokeRun {
    fs::path root;
    std::optional<app::RunConfig> config;
};

std::map<std::string, std::string> manifests_under(const fs::path& run_dir) {
    std::map<std::string, std::string> out;
    if (!fs::is_directory(run_dir)) return out;
    for (const auto& e : fs::recursive_directory_iterator(run_dir)) {
        if (e.is_regular_file() && e.path().filename() == "manifest.json") {
            out[fs::relative(e.path(), run_dir).string()] = read_text_file(e.path());
        }
    }
    return out;
}

Outcome end_to_end(const pt::TempDir& scratch, SmokeRun& kept) {
    const auto start = Clock::now();
    Checks c;
    const auto config_path = pt::source_dir() / "configs" / "demo.json";
    std::map<std::string, std::string> manifests[2];
    std::string board;
    for (int run = 0; run < 2; ++run) {
        const auto root = scratch.path() / ("run" + std::to_string(run));
        const auto base = pt::shell_quote(pt::cli_path().string()) + " -c " + pt::shell_quote(config_path.string()) +
                          " --root " + pt::shell_quote(root.string()) + " ";
        for (const auto& cmd : kChain) {
            const auto r = pt::run_command(base + cmd);
            if (r.exit_code != 0) {
                c.expect(false, cmd + " exited " + std::to_string(r.exit_code) + ": " +
                                    r.output.substr(r.output.size() > 300 ? r.output.size() - 300 : 0));
                return c.outcome("");
            }
            if (cmd == "evaluate" && run == 0) board = r.output;
        }
        auto cfg = app::RunConfig::load(config_path);
        cfg.set("output_root=" + root.string());
        const auto leaderboard = app::stage_artifact(cfg, "evaluate", "leaderboard");
        c.expect(fs::is_regular_file(leaderboard) && fs::file_size(leaderboard) > 0, "no leaderboard file");
        manifests[run] = manifests_under(cfg.run_dir());
        if (run == 0) {
            kept.root = root;
            kept.config = cfg;
        }
    }
    c.expect(manifests[0].size() >= kChain.size(), std::to_string(manifests[0].size()) + " manifests");
    c.expect(manifests[0] == manifests[1], "manifests differ between the two runs");
    for (const std::string model : {"reference", "corrupted", "base", "dpo"}) {
        c.expect(board.find(model) != std::string::npos, "leaderboard lacks " + model);
    }
    const double secs = seconds_since(start);
    c.expect(secs <= 45 * 60.0, "runtime " + fmt(secs) + " s");
    return c.outcome(std::to_string(manifests[0].size()) + " manifests byte-identical across two runs, " +
                     fmt(secs, 3) + " s for both");
}

Outcome dpo_efficacy(const SmokeRun& run) {
    Checks c;
    if (!run.config) return {false, "end-to-end run did not complete"};
    const auto& cfg = *run.config;
    const auto manifest = app::read_stage_manifest(cfg, "train-dpo");
    const auto steps = manifest.counts.at("steps");
    const auto train_pairs = manifest.counts.at("train_pairs");
    c.expect(steps == 250, "trained " + std::to_string(steps) + " steps");
    c.expect(train_pairs >= 200, std::to_string(train_pairs) + " training pairs");

    std::vector<TrajectoryPoint> traj;
    for (const auto& row : read_jsonl(app::stage_artifact(cfg, "train-dpo", "trajectory"))) {
        traj.push_back(trajectory_point_from_json(row.value));
    }
    // Step 0 is the identity point; checkpoints are the evaluations after it.
    std::vector<TrajectoryPoint> checkpoints;
    for (const auto& p : traj) {
        if (p.step > 0) checkpoints.push_back(p);
    }
    c.expect(checkpoints.size() >= 5, std::to_string(checkpoints.size()) + " checkpoints");
    const double rho = checkpoints.size() >= 2 ? trajectory_spearman(checkpoints) : 0.0;
    c.expect(rho > 0.0, "Spearman " + fmt(rho));

    auto dc_json = cfg.section("train_dpo");
    if (!dc_json.contains("seed")) dc_json["seed"] = cfg.seed();
    const auto dc = DPOConfig::from_json(dc_json);
    auto policy = Checkpoint::read(cfg.input_path("policy_checkpoint")).model();
    const app::LatentStore store(cfg.input_path("latents"));
    const auto prompts = app::read_prompts(cfg.input_path("prompts"));
    const auto heldout = app::read_stage_pairs(cfg, "t1", "heldout");
    const auto heldset = make_validation_set(app::dpo_examples(heldout, store, prompts),
                                             derive_seed(dc.seed, "acceptance:heldout"), dc.t_lo, dc.t_hi);
    const auto point = evaluate_validation(policy, heldset, dc.beta, steps);
    c.expect(!heldset.pairs.empty(), "empty held-out split");
    c.expect(point.accuracy >= 0.7, "held-out accuracy " + fmt(point.accuracy));
    return c.outcome("held-out accuracy " + fmt(point.accuracy) + " on " + std::to_string(heldset.pairs.size()) +
                     " pairs, Spearman " + fmt(rho) + " over " + std::to_string(checkpoints.size()) +
                     " checkpoints, " + std::to_string(train_pairs) + " training pairs");
}

Outcome timestep_confinement(const SmokeRun& run) {
    Checks c;
    std::int64_t run_draws = 0;
    if (run.config) {
        const auto hist = Json::parse(read_text_file(app::stage_artifact(*run.config, "train-dpo", "t_histogram")));
        for (const auto& [t, n] : hist.items()) {
            const int td = std::stoi(t);
            c.expect(td >= 901 && td <= 999, "training draw at t = " + t);
            run_draws += n.get<std::int64_t>();
        }
        const auto steps = app::read_stage_manifest(*run.config, "train-dpo").counts.at("steps");
        c.expect(run_draws == steps * 8, std::to_string(run_draws) + " draws for " + std::to_string(steps) + " steps");
    } else {
        c.expect(false, "end-to-end run did not complete");
    }

    SplitMix64 rng(derive_seed(7, "acceptance:chi2"));
    std::vector<std::int64_t> counts(99, 0);
    for (int i = 0; i < 100000; ++i) {
        const int t = sample_timestep(rng, TimestepSpec::window()).t_disc;
        c.expect(t >= 901 && t <= 999, "window draw at t = " + std::to_string(t));
        if (t >= 901 && t <= 999) ++counts[static_cast<std::size_t>(t - 901)];
    }
    const double stat = chi_square_uniform(counts);
    const double p = boost::math::cdf(boost::math::complement(boost::math::chi_squared(98.0), stat));
    c.expect(p > 0.01, "chi-square p = " + fmt(p));
    return c.outcome(std::to_string(run_draws) + " training draws in [901, 999]; 1e5 draws chi2 = " + fmt(stat) +
                     ", p = " + fmt(p));
}

// ---- 8 ----------------------------------------------------------------------

Outcome shape_identities() {
    Checks c;
    SplitMix64 rng(8);
    std::size_t cases = 0;
    for (int T = 1; T <= 49; T += 4) {
        for (int R = 1; R <= T; ++R) {
            {
                const int s = 4;
                const int t = 1 + (T - 1) / 4;
                const auto m = build_mask(R, T, s, 2, 3);
                c.expect(m.shape() == Shape4{s, t, 2, 3}, "mask shape R=" + std::to_string(R));
                const auto oracle = pt::mask_oracle(R, T, s);
                double ones = 0.0;
                for (int j = 0; j < s; ++j) {
                    for (int k = 0; k < t; ++k) {
                        const double want = oracle[static_cast<std::size_t>(j * t + k)];
                        ones += want;
                        for (int y = 0; y < 2; ++y) {
                            for (int x = 0; x < 3; ++x) c.expect(m(j, k, y, x) == want, "mask entry");
                        }
                    }
                }
                c.expect(ones == s + (R - 1), "mask ones per site");
                if (T > 1) {
                    bool rejected = false;
                    try {
                        build_mask(R, T, 2, 1, 1);
                    } catch (const ValidationError&) {
                        rejected = true;
                    }
                    c.expect(rejected, "stride 2 accepted for T=" + std::to_string(T));
                }
                ++cases;
            }
            if ((R - 1) % 4 != 0) continue;
            for (const int H : {8, 16}) {
                for (const int W : {8, 24}) {
                    Tensor4 frames({3, R, H, W}, Semantics::Pixels);
                    for (auto& v : frames.values()) v = 0.05 + rng.uniform01();
                    const auto z = build_condition_latent(frames, T);
                    c.expect(z.shape() == Shape4{16, 1 + (T - 1) / 4, H / 8, W / 8}, "latent shape");
                    const int filled = 1 + (R - 1) / 4;
                    for (int k = 0; k < z.shape().t; ++k) {
                        double mag = 0.0;
                        for (int ch = 0; ch < 16; ++ch) {
                            for (int y = 0; y < H / 8; ++y) {
                                for (int x = 0; x < W / 8; ++x) mag += std::abs(z(ch, k, y, x));
                            }
                        }
                        c.expect(k < filled ? mag > 0.0 : mag == 0.0, "latent frame " + std::to_string(k));
                    }
                    ++cases;
                }
            }
        }
    }
    Tensor4 frames({3, 17, 16, 16}, Semantics::Pixels);
    for (auto& v : frames.values()) v = rng.uniform01();
    c.expect(build_condition_latent(frames, 49).shape().t == 13, "R=17, T=49 latent frames");
    const auto m = build_mask(17, 49, 4, 1, 1);
    c.expect(m.size() == 52 && m.sum() == 20.0, "R=17, T=49 mask ones");
    return c.outcome(std::to_string(cases) + " (R, T, s, H, W) cases; R=17, T=49 gives 13 frames and 20/52 ones");
}

// ---- 9 ----------------------------------------------------------------------

Outcome euler_exactness() {
    Checks c;
    SplitMix64 rng(9);
    const Shape4 shape{16, 5, 4, 4};
    const auto x0 = gaussian_like(shape, rng);
    const auto x1 = gaussian_like(shape, rng, Semantics::Clean);
    const auto v = velocity_target(x0, x1);
    double worst = 0.0;
    for (const int n : {1, 4, 16}) {
        const auto got = euler_sample([&](const Tensor4&, double) { return v; }, x0, n);
        for (std::size_t i = 0; i < got.size(); ++i) {
            const double scale = std::max({1.0, std::abs(x0[i]), std::abs(x1[i])});
            worst = std::max(worst, std::abs(got[i] - x1[i]) / scale);
        }
    }
    c.expect(worst <= 8 * std::numeric_limits<double>::epsilon(), "max relative error " + fmt(worst));
    return c.outcome("max relative error " + fmt(worst) + " for n in {1, 4, 16}");
}

// ---- 10 ---------------------------------------------------------------------

Outcome judge_protocol() {
    Checks c;
    const auto cases = read_jsonl(pt::fixture("verdict_conformance.jsonl"));
    c.expect(cases.size() == 50, std::to_string(cases.size()) + " corpus cases");
    std::size_t accepted = 0;
    for (const auto& row : cases) {
        const auto raw = row.value.at("raw").get<std::string>();
        const auto dim = row.value.at("dimension").get<std::string>();
        const bool accept = row.value.at("accept").get<bool>();
        try {
            const auto v = parse_verdict(raw, dim);
            c.expect(accept && v.score == row.value.at("score").get<int>() && v.dimension == dim,
                     "line " + std::to_string(row.line) + " accepted");
            ++accepted;
        } catch (const ProtocolError&) {
            c.expect(!accept, "line " + std::to_string(row.line) + " rejected");
        }
    }

    OracleJudge judge([](const std::string&) {
        return std::map<std::string, int>{{"sa", 4}, {"ptv", 3}, {"persistence", 5}, {"chain", 2}};
    });
    std::vector<JudgeRequest> requests;
    const std::vector<std::string> laws = {"chain"};
    for (const std::string video : {"g/a", "g/b", "g/c"}) {
        const VideoRef ref{video, sha256_hex(video), 49, 16.0};
        for (auto& r : build_judge_queries(ref, "dominoes topple in a chain", laws, judge.version())) {
            requests.push_back(r);
        }
    }
    auto doubled = requests;
    doubled.insert(doubled.end(), requests.begin(), requests.end());
    VerdictCache cache;
    JudgeRunStats first, second;
    const auto a = run_judge(doubled, judge, cache, 4, &first);
    const auto b = run_judge(doubled, judge, cache, 4, &second);
    c.expect(first.calls == requests.size(), "first pass made " + std::to_string(first.calls) + " calls");
    c.expect(second.calls == 0, "repeat made " + std::to_string(second.calls) + " calls");
    c.expect(judge.calls() == requests.size(), "judge saw " + std::to_string(judge.calls()) + " calls");
    c.expect(a.size() == doubled.size() && b.size() == doubled.size(), "verdict count");
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) c.expect(a[i].score == b[i].score, "scores");
    return c.outcome("50 cases (" + std::to_string(accepted) + " accepted); " + std::to_string(first.calls) +
                     " calls for " + std::to_string(2 * doubled.size()) + " requests");
}

// ---- 11 ---------------------------------------------------------------------

Outcome aggregation() {
    Checks c;
    // Hand-computed: 0.5 * 5 + 0.5 * 5, 0.5 * 3 + 0.5 * (2 + 4) / 2,
    // 0.5 * 2 + 0.5 * (4 + 4 + 4) / 3, 0.5 * 11/3 + 0.5 * (1 + 2 + 5 + 4) / 4.
    const std::vector<std::pair<double, double>> fixtures = {
        {overall_score({5, 5, 5}, std::vector<LawUnit>{{"v1", "chain", 5}, {"v2", "fluids", 5}}), 5.0},
        {overall_score({3, 3, 3}, std::vector<LawUnit>{{"v1", "collision_rebound", 2}, {"v1", "fluids", 4}}), 3.0},
        {overall_score({2, 2, 2}, std::vector<LawUnit>{{"v1", "chain", 4}, {"v2", "chain", 4}, {"v3", "fluids", 4}}),
         3.0},
        {overall_score({3, 4, 4}, std::vector<LawUnit>{{"v1", "chain", 1},
                                                       {"v1", "fluids", 2},
                                                       {"v2", "shadow_reflection", 5},
                                                       {"v3", "rolling_sliding", 4}}),
         0.5 * 11.0 / 3.0 + 1.5},
    };
    double worst = 0.0;
    for (const auto& [got, want] : fixtures) worst = std::max(worst, std::abs(got - want));
    c.expect(worst <= 1e-12, "fixture error " + fmt(worst));

    SplitMix64 rng(11);
    for (int trial = 0; trial < 2000; ++trial) {
        std::array<double, 3> g{};
        bool all_five = true;
        for (auto& x : g) {
            x = rng.uniform01() < 0.85 ? 5.0 : 1.0 + 4.0 * rng.uniform01();
            all_five = all_five && x == 5.0;
        }
        std::vector<LawUnit> units;
        const auto n = 1 + rng.bounded(8);
        for (std::uint64_t i = 0; i < n; ++i) {
            const int s = rng.uniform01() < 0.85 ? 5 : 1 + static_cast<int>(rng.bounded(4));
            all_five = all_five && s == 5;
            units.push_back({"v" + std::to_string(i), "chain", s});
        }
        c.expect((overall_score(g, units) == 5.0) == all_five, "overall 5 iff all inputs 5");
    }

    std::vector<std::string> gens, prompts;
    for (int i = 0; i < 8; ++i) gens.push_back("g" + std::to_string(i));
    for (int i = 0; i < 93; ++i) prompts.push_back("p" + std::to_string(i));
    const auto q = split_judge_corpus(gens, prompts, "g5", 12);
    const std::string cells = std::to_string(q.train.size()) + "/" + std::to_string(q.test_prompt.size()) + "/" +
                              std::to_string(q.test_model.size()) + "/" + std::to_string(q.test_both.size());
    c.expect(cells == "567/84/81/12", "quadrants " + cells);
    return c.outcome("fixtures within " + fmt(worst) + "; 5 iff all 5 over 2000 trials; quadrants " + cells);
}

Outcome guarded(const std::function<Outcome()>& f) {
    try {
        return f();
    } catch (const std::exception& e) {
        return {false, std::string("exception: ") + e.what()};
    }
}

}  // namespace

int main() {
    struct Row {
        int id;
        std::string name;
        Outcome outcome;
    };
    std::vector<Row> rows;
    pt::TempDir scratch("physpref-acceptance");
    SmokeRun smoke;

    rows.push_back({1, "pipeline determinism and rules", guarded(pipeline_rules)});
    rows.push_back({2, "quota exactness", guarded(quota_exactness)});
    rows.push_back({3, "DPO identity at init", guarded(dpo_identity)});
    rows.push_back({4, "gradient fidelity", guarded(gradient_fidelity)});
    rows.push_back({5, "step accounting", guarded(step_accounting)});
    const auto e2e = guarded([&] { return end_to_end(scratch, smoke); });
    rows.push_back({6, "desk-scale DPO efficacy", guarded([&] { return dpo_efficacy(smoke); })});
    rows.push_back({7, "timestep confinement", guarded([&] { return timestep_confinement(smoke); })});
    rows.push_back({8, "shape identities", guarded(shape_identities)});
    rows.push_back({9, "Euler exactness", guarded(euler_exactness)});
    rows.push_back({10, "judge protocol", guarded(judge_protocol)});
    rows.push_back({11, "aggregation", guarded(aggregation)});
    rows.push_back({12, "end-to-end smoke", e2e});

    int failed = 0;
    for (const auto& r : rows) {
        std::cout << (r.outcome.pass ? "PASS" : "FAIL") << "  " << (r.id < 10 ? " " : "") << r.id << "  " << r.name
                  << ": " << r.outcome.detail << "\n";
        if (!r.outcome.pass) ++failed;
    }
    std::cout << (failed == 0 ? "all 12 criteria pass" : std::to_string(failed) + " of 12 criteria fail") << "\n";
    return failed == 0 ? 0 : 1;
}
