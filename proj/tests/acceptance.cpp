// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dexr/cli/commands.hpp"
#include "dexr/dexr.hpp"
#include "oracle.hpp"
#include "support.hpp"

using namespace dexr;
using namespace dexr::testing;
namespace fs = std::filesystem;

namespace {

struct outcome {
    bool pass = false;
    std::string detail;
};

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point start) {
    return std::chrono::duration<double>(clock_type::now() - start).count();
}

std::string fmt(const char* f, double a) {
    char buf[96];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string fmt(const char* f, double a, double b) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

// Equal up to 4 units in the last place, the same rule as gtest's DOUBLE_EQ.
// Hand-written decimals like 0.64 are not the product 0.8 * 0.8 bit for bit.
bool ulp_equal(double a, double b) {
    if (a == b) return true;
    double x = a;
    for (int i = 0; i < 4; ++i) {
        x = std::nextafter(x, b);
        if (x == b) return true;
    }
    return false;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch_root() {
    static const fs::path root = [] {
        auto p = fs::temp_directory_path() / "dexr_acceptance";
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return root;
}

run_config config_from(const nlohmann::json& j) {
    run_config c;
    apply_config(c, j);
    return c;
}

std::vector<nlohmann::json> read_log(const fs::path& run_dir) {
    std::vector<nlohmann::json> out;
    std::ifstream in(run_dir / "log.jsonl");
    std::string line;
    while (std::getline(in, line)) out.push_back(nlohmann::json::parse(line));
    return out;
}

// 1. Central differences against tape gradients on the full weighted loss.
outcome gradient_correctness() {
    const auto start = clock_type::now();
    const auto c = tiny_config();
    rng_type rng(42);
    const auto params = init_parameters<double>(c, rng);
    const auto schedule = make_schedule(schedule_kind::cosine, c.horizon);
    const auto ex = tiny_example();
    const auto noise = normal_matrix(ex.review.size() + 1, c.d_model, rng);
    const loss_weights w{1.0, 0.1, 1.0};
    const auto report = finite_difference_report(
        [&](tape& t, const bound_parameters<double>& p) {
            return record_objective(t, p, c, ex, 4, schedule, noise, w).total;
        },
        params, 3e-5);
    const double secs = seconds_since(start);
    return {report.max_relative_error < 1e-4 && secs < 60.0,
            fmt("max relative error %.3g over ", report.max_relative_error) + std::to_string(report.coordinates) +
                " coordinates (worst " + report.worst_parameter + "), " + fmt("%.1f s", secs)};
}

// 2. Forward marginals and untouched prefix rows, cosine T=200, FO layout.
outcome diffusion_marginals() {
    const std::size_t T = 200, n = 10000, d = 4;
    const sequence_layout l{2, 3};
    auto x0 = tensor::matrix(l.length(), d);
    for (std::size_t r = 0; r < x0.rows(); ++r)
        for (std::size_t j = 0; j < d; ++j) x0(r, j) = 0.3 * double(r) - 0.4 * double(j) + 0.2;
    const auto s = make_schedule(schedule_kind::cosine, T);
    rng_type rng(7);
    std::normal_distribution<double> normal;
    const std::size_t row = l.word_begin() + 1;
    double worst = 0.0;
    bool prefix_intact = true;
    for (std::size_t t : {std::size_t{1}, T / 2, T}) {
        std::vector<double> sum(d, 0.0), sq(d, 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            const auto cr = corrupt(x0, l, t, s, [&] { return normal(rng); });
            for (std::size_t r = 0; r < l.word_begin(); ++r)
                for (std::size_t j = 0; j < d; ++j) prefix_intact = prefix_intact && cr.x_t(r, j) == x0(r, j);
            for (std::size_t j = 0; j < d; ++j) {
                sum[j] += cr.x_t(row, j);
                sq[j] += cr.x_t(row, j) * cr.x_t(row, j);
            }
        }
        const double g = s(t), v = 1.0 - g;
        const double se_mean = std::sqrt(v / double(n)), se_var = v * std::sqrt(2.0 / double(n - 1));
        for (std::size_t j = 0; j < d; ++j) {
            const double mean = sum[j] / double(n);
            const double var = (sq[j] - double(n) * mean * mean) / double(n - 1);
            worst = std::max(worst, std::abs(mean - std::sqrt(g) * x0(row, j)) / se_mean);
            worst = std::max(worst, std::abs(var - v) / se_var);
        }
    }
    return {worst < 4.0 && prefix_intact,
            fmt("worst deviation %.2f SE", worst) + (prefix_intact ? ", prefix rows bit-identical" : ", prefix rows changed")};
}

// 3. gamma(0)=1, gamma(T)<=1e-4, strictly decreasing.
outcome schedule_contract() {
    std::size_t checked = 0;
    for (auto kind : {schedule_kind::cosine, schedule_kind::linear})
        for (std::size_t T : {1u, 2u, 8u, 50u, 200u, 1000u, 4000u}) {
            const auto s = make_schedule(kind, T);
            if (s(0) != 1.0 || !(s(T) <= 1e-4))
                return {false, std::string(to_string(kind)) + " T=" + std::to_string(T) + " endpoints"};
            for (std::size_t t = 1; t <= T; ++t)
                if (!(s(t) < s(t - 1)))
                    return {false, std::string(to_string(kind)) + " T=" + std::to_string(T) + " not decreasing at " +
                                       std::to_string(t)};
            ++checked;
        }
    return {true, std::to_string(checked) + " schedules"};
}

// 4. Ten template sentences: NLL below 0.1 and exact replay by reverse sampling.
outcome memorization() {
    const auto start = clock_type::now();
    auto m = make_memorization_corpus();
    rng_type init = seed_streams(1).stream("init");
    auto model = make_model<double>(m.config, init, 3.5);
    train_config tc;
    tc.batch_size = 1;
    tc.max_epochs = 200;
    tc.policy.decay = 0.95;
    tc.policy.stop_after = 1000;
    const auto s = make_schedule(schedule_kind::cosine, m.config.horizon);
    trainer<double> tr(model, s, tc);
    double best = std::numeric_limits<double>::infinity();
    std::size_t epochs = 0;
    for (const auto& e : tr.train(m.examples)) {
        best = std::min(best, e.loss_w);
        epochs = e.epoch;
    }
    rng_type rng = seed_streams(1).stream("sampler");
    std::size_t exact = 0;
    for (const auto& ex : m.examples) {
        const auto enc = encode_states(model, ex.persona);
        exact += reverse_sample(model, ex.user, ex.item, ex.keywords, enc, s, sample_options{}, rng).tokens == ex.review;
    }
    const double secs = seconds_since(start);
    return {best < 0.1 && exact >= 9 && secs < 600.0,
            fmt("min NLL %.4f in ", best) + std::to_string(epochs) + " epochs, " + std::to_string(exact) +
                "/10 reproduced, " + fmt("%.1f s", secs)};
}

// Shared desk-scale corpus and three training arms for criteria 5, 6 and 10.
struct desk_run {
    fs::path data;
    std::vector<nlohmann::json> log_none;
    metric_report none, f_full, f_ablated;
    double baseline_rmse = 0.0;
};

nlohmann::json desk_config() {
    return {{"seed", 1},       {"d_model", 16},      {"ffn_dim", 32},          {"horizon", 50},
            {"max_encoder_len", 24}, {"max_epochs", 50}, {"stop_after", 1000}, {"lambda_r", 0.5},
            {"checkpoint_every", 50}};
}

const desk_run& desk() {
    static const desk_run run = [] {
        desk_run r;
        const auto root = scratch_root() / "desk";
        r.data = root / "data";
        const auto base = config_from(desk_config());
        cmd_gen_data(base, r.data);
        cmd_build_profiles(base, r.data);
        const auto test_path = r.data / "test.jsonl", lexicon = r.data / "lexicon.txt";

        auto arm = [&](const std::string& name, nlohmann::json extra) {
            auto j = desk_config();
            j.update(extra);
            const auto cfg = config_from(j);
            const auto ckpt = cmd_train(cfg, r.data, root / name);
            cmd_generate(cfg, ckpt, r.data, "test", root / (name + ".jsonl"));
            std::printf("  desk arm %s trained and decoded\n", name.c_str());
            std::fflush(stdout);
            return cmd_evaluate(root / (name + ".jsonl"), test_path, lexicon);
        };
        r.none = arm("none", {{"mode", "none"}});
        r.log_none = read_log(root / "none");
        r.f_full = arm("f_full", {{"mode", "F"}});
        r.f_ablated = arm("f_ablated", {{"mode", "F"}, {"ablate_diffusion", true}});

        const auto train = load_records((r.data / "train.jsonl").string());
        const auto test = load_records(test_path.string());
        double mean = 0.0;
        for (const auto& x : train) mean += x.rating;
        mean /= double(train.size());
        std::vector<double> truth, base_pred;
        for (const auto& x : test) {
            truth.push_back(x.rating);
            base_pred.push_back(mean);
        }
        r.baseline_rmse = rmse(base_pred, truth);
        return r;
    }();
    return run;
}

// 5. Held-out RMSE at least 10% under the train-mean baseline, and a 30% drop
// in total loss over the first 50 epochs.
outcome desk_learning_signal() {
    const auto& r = desk();
    const double first = r.log_none.front().at("loss_total").get<double>();
    const double last = r.log_none.back().at("loss_total").get<double>();
    const double drop = (first - last) / first;
    const double gain = 1.0 - r.none.rmse / r.baseline_rmse;
    return {gain >= 0.10 && drop >= 0.30 && r.log_none.size() <= 50,
            fmt("test RMSE %.4f vs baseline %.4f", r.none.rmse, r.baseline_rmse) + fmt(" (%.1f%% better, need 10%%)", 100 * gain) +
                fmt("; loss %.3f -> %.3f", first, last) + " over " + std::to_string(r.log_none.size()) +
                fmt(" epochs (%.1f%% drop)", 100 * drop)};
}

// 6. Keyword control raises FMR; diffusion training raises USR.
outcome keyword_control() {
    const auto& r = desk();
    const bool fmr_ok = r.f_full.fmr >= 2.0 * r.none.fmr;
    const bool usr_ok = r.f_full.usr > r.f_ablated.usr;
    return {fmr_ok && usr_ok, fmt("FMR F %.3f vs none %.3f", r.f_full.fmr, r.none.fmr) +
                                  fmt("; USR full %.3f vs ablated %.3f", r.f_full.usr, r.f_ablated.usr)};
}

// 7. Text metrics against the brute-force counter plus the hand-derived examples.
outcome metric_oracles() {
    std::mt19937_64 rng(2024);
    std::size_t cases = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + rng() % 6;
        const auto cands = random_corpus(rng, n, 7);
        const auto refs = random_corpus(rng, n, 7);
        for (std::size_t order : {1u, 4u})
            if (bleu_n(cands, refs, order) != brute_bleu(cands, refs, order))
                return {false, "BLEU-" + std::to_string(order) + " mismatch on case " + std::to_string(trial)};
        for (std::size_t order : {1u, 2u}) {
            const auto got = rouge_n(cands, refs, order), want = brute_rouge(cands, refs, order);
            if (got.precision != want.precision || got.recall != want.recall || got.f1 != want.f1)
                return {false, "ROUGE-" + std::to_string(order) + " mismatch on case " + std::to_string(trial)};
        }
        ++cases;
    }
    auto toks = [](const char* s) { return split_tokens(s); };
    auto gen = [&](const char* g, std::optional<std::string> f = {}) {
        return eval_pair{toks(g), toks(g), {}, {}, std::move(f)};
    };
    std::vector<std::string> failed;
    auto expect = [&](bool ok, const char* what) {
        if (!ok) failed.emplace_back(what);
    };
    const std::vector<double> pred{4, 6}, truth{5, 5};
    expect(ulp_equal(rmse(pred, truth), 1.0) && ulp_equal(mae(pred, truth), 1.0), "rating pair");
    const std::vector<token_list> aa{toks("a a")}, a{toks("a")};
    expect(bleu_n(aa, a, 1) == 50.0, "clipped unigram");
    const std::vector<token_list> abc{toks("a b c")}, ac{toks("a c")};
    const auto r1 = rouge_n(abc, ac, 1);
    expect(ulp_equal(r1.precision, 100.0 * 2.0 / 3.0) && ulp_equal(r1.recall, 100.0), "rouge hand count");
    const std::vector<eval_pair> fm{gen("fit", "fit"), gen("color"), gen("size", "zip")};
    const auto f = feature_matching(fm);
    expect(f.value == 0.5 && f.excluded == 1 && f.counted == 2, "fmr exclusion");
    expect(fmr(std::vector<eval_pair>{gen("a heart shaped pendant", "art")}) == 0.0, "fmr exact token");
    const std::vector<std::string> lex4{"a", "b", "c", "d"};
    expect(fcr(std::vector<eval_pair>{gen("a x a"), gen("b y"), gen("a")}, lex4) == 0.5, "fcr half");
    const std::vector<std::string> lex2{"fit", "color"};
    expect(div(std::vector<eval_pair>{gen("fit is great"), gen("good fit"), gen("the fit")}, lex2) == 1.0, "div shared");
    const std::vector<token_list> mixed{toks("a"), toks("a"), toks("b")};
    expect(ulp_equal(usr(mixed), 2.0 / 3.0), "usr mixed");
    std::string detail = std::to_string(cases) + " randomized cases exact";
    for (const auto& w : failed) detail += "; failed " + w;
    return {failed.empty() && cases == 50, detail + (failed.empty() ? ", derived examples exact" : "")};
}

// 8. Cumulative 0.8x decay with a stop on the tenth plateau.
outcome lr_trace_check() {
    const auto& trace = lr_trace();
    lr_state s;
    for (std::size_t e = 0; e < trace.size(); ++e) {
        s = lr_schedule_step(s, trace[e].loss);
        const bool ok = s.counter == trace[e].counter && ulp_equal(s.lr, trace[e].lr) && s.best == trace[e].best &&
                        s.stop == (e + 1 == trace.size());
        if (!ok) return {false, "diverged at epoch " + std::to_string(e + 1)};
    }
    const bool final_ok = ulp_equal(s.lr, std::pow(0.8, 10) * 1.0);
    return {final_ok, fmt("30 epochs exact, stop with lr %.10f", s.lr)};
}

// 9. Two full pipelines from the same seed are byte-identical.
outcome determinism() {
    const nlohmann::json j{{"num_users", 24},   {"num_items", 12},       {"records_per_user", 4},
                           {"d_model", 8},      {"num_heads", 2},        {"num_layers", 1},
                           {"ffn_dim", 16},     {"max_encoder_len", 16}, {"max_review_len", 12},
                           {"horizon", 6},      {"max_epochs", 3},       {"checkpoint_every", 1},
                           {"batch_size", 8},   {"profile_k", 2},        {"embed_dim", 8},
                           {"mode", "FO"}};
    const auto cfg = config_from(j);
    auto pipeline = [&](const std::string& name) {
        const auto dir = scratch_root() / name;
        cmd_gen_data(cfg, dir / "data");
        cmd_build_profiles(cfg, dir / "data");
        const auto ckpt = cmd_train(cfg, dir / "data", dir / "run");
        cmd_generate(cfg, ckpt, dir / "data", "test", dir / "pred.jsonl");
        return dir;
    };
    const auto a = pipeline("det_a"), b = pipeline("det_b");
    std::size_t files = 0;
    for (const char* f : {"data/train.jsonl", "data/test.jsonl", "data/train.profiles.jsonl",
                          "data/test.profiles.jsonl", "run/log.jsonl", "run/epoch-1.ckpt", "run/epoch-2.ckpt",
                          "run/epoch-3.ckpt", "pred.jsonl"}) {
        const auto x = slurp(a / f);
        if (x.empty() || x != slurp(b / f)) return {false, std::string("differs or missing: ") + f};
        ++files;
    }
    return {true, std::to_string(files) + " files byte-identical"};
}

// 10. No training profile cites a test record.
outcome leakage_guard() {
    const auto& r = desk();
    const auto test = load_records((r.data / "test.jsonl").string());
    std::set<std::string> test_ids;
    for (const auto& x : test) test_ids.insert(x.id);
    const auto profiles = load_profiles((r.data / "train.profiles.jsonl").string());
    std::size_t cited = 0, leaked = 0;
    for (const auto& [id, pair] : profiles.by_record)
        for (const auto* p : {&pair.first, &pair.second})
            for (const auto& src : p->sources) {
                if (src.empty()) continue;
                ++cited;
                leaked += test_ids.count(src);
            }
    return {leaked == 0 && cited > 0, std::to_string(cited) + " profile sources scanned against " +
                                          std::to_string(test_ids.size()) + " test ids, " + std::to_string(leaked) +
                                          " leaked"};
}

}  // namespace

int main() {
    const std::vector<std::pair<int, std::function<outcome()>>> criteria{
        {1, gradient_correctness}, {2, diffusion_marginals}, {3, schedule_contract}, {4, memorization},
        {5, desk_learning_signal}, {6, keyword_control},     {7, metric_oracles},    {8, lr_trace_check},
        {9, determinism},          {10, leakage_guard}};
    int failures = 0;
    for (const auto& [n, fn] : criteria) {
        outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("[criterion %d] %s: %s\n", n, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
        failures += o.pass ? 0 : 1;
    }
    std::printf("%d of %zu criteria passed\n", int(criteria.size()) - failures, criteria.size());
    fs::remove_all(scratch_root());
    return failures == 0 ? 0 : 1;
}
