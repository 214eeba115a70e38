#pragma once

#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dexr/cli/run_config.hpp"
#include "dexr/corpus/embedder.hpp"
#include "dexr/corpus/profiles.hpp"
#include "dexr/corpus/record.hpp"
#include "dexr/corpus/synthetic.hpp"
#include "dexr/corpus/vocabulary.hpp"
#include "dexr/diffusion/sampler.hpp"
#include "dexr/diffusion/schedule.hpp"
#include "dexr/error.hpp"
#include "dexr/metrics/report.hpp"
#include "dexr/model/checkpoint.hpp"
#include "dexr/model/inputs.hpp"
#include "dexr/model/network.hpp"
#include "dexr/training/trainer.hpp"

namespace dexr {

namespace fs = std::filesystem;

inline const std::vector<std::string>& split_names() {
    static const std::vector<std::string> names{"train", "valid", "test"};
    return names;
}

inline void ensure_directory(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw error("cannot create directory '" + dir.string() + "'");
}

inline std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw error("cannot write '" + path.string() + "'");
    return out;
}

inline std::vector<std::string> read_lines(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw error("cannot open '" + path.string() + "'");
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) out.push_back(line);
    return out;
}

/// gen-data: seeded synthetic corpus split 8:1:1 into {train,valid,test}.jsonl
/// plus the feature lexicon (one token per line).
inline void cmd_gen_data(const run_config& cfg, const fs::path& out_dir) {
    cfg.validate();
    ensure_directory(out_dir);
    const auto corpus = synth_generate(cfg.synthetic());
    const auto splits = split_records(corpus.records, cfg.seed);
    save_records(splits.train, (out_dir / "train.jsonl").string());
    save_records(splits.valid, (out_dir / "valid.jsonl").string());
    save_records(splits.test, (out_dir / "test.jsonl").string());
    auto lex = open_output(out_dir / "lexicon.txt");
    for (const auto& f : corpus.feature_lexicon) lex << f << '\n';
}

inline mean_vector_embedder profile_embedder(const run_config& cfg, const vocabulary& vocab) {
    return mean_vector_embedder::random(vocab, cfg.embed_dim, seed_streams(cfg.seed).seed_for("profile"));
}

/// build-profiles: vocabulary from the training split, then profiles per
/// split, each from that split's own history. Evaluation splits fall back
/// to training history for owners with no other record in the split.
inline void cmd_build_profiles(const run_config& cfg, const fs::path& data_dir) {
    cfg.validate();
    const auto train = load_records((data_dir / "train.jsonl").string());
    const auto vocab = build_vocab(train, cfg.min_count);
    vocab.save((data_dir / "vocab.txt").string());
    const auto embedder = profile_embedder(cfg, vocab);
    for (const auto& name : split_names()) {
        const auto split = name == "train" ? train : load_records((data_dir / (name + ".jsonl")).string());
        const auto table = build_profile_table(split, embedder, cfg.profiles(), name == "train" ? nullptr : &train);
        save_profiles(table, split, (data_dir / (name + ".profiles.jsonl")).string());
    }
}

struct split_data {
    record_set records;
    profile_table profiles;
};

inline split_data load_split(const fs::path& data_dir, const std::string& name) {
    return {load_records((data_dir / (name + ".jsonl")).string()),
            load_profiles((data_dir / (name + ".profiles.jsonl")).string())};
}

inline std::vector<model_example> make_examples(const split_data& data, const vocabulary& vocab,
                                                const id_index& users, const id_index& items, keyword_mode mode,
                                                const model_config& cfg) {
    std::vector<model_example> out;
    out.reserve(data.records.size());
    for (const auto& r : data.records) out.push_back(make_example(r, data.profiles, vocab, users, items, mode, cfg));
    return out;
}

/// train: fits a model on the training split and writes
/// run_dir/epoch-<k>.ckpt (every checkpoint_every epochs and at the end),
/// run_dir/log.jsonl and run_dir/config.json. Returns the final checkpoint.
inline fs::path cmd_train(const run_config& cfg, const fs::path& data_dir, const fs::path& run_dir) {
    cfg.validate();
    const auto vocab = vocabulary::load((data_dir / "vocab.txt").string());
    const auto train = load_split(data_dir, "train");
    if (train.records.empty()) throw validation_error("train: empty training split");
    id_index users, items;
    for (const auto& r : train.records) {
        users.add(r.user);
        items.add(r.item);
    }
    model_config mc = cfg.model;
    mc.vocab_size = vocab.size();
    mc.num_users = users.size();
    mc.num_items = items.size();
    mc.validate();
    const auto examples = make_examples(train, vocab, users, items, cfg.mode, mc);

    double mean_rating = 0.0;
    for (const auto& r : train.records) mean_rating += r.rating;
    mean_rating /= double(train.records.size());

    rng_type init = seed_streams(cfg.seed).stream("init");
    checkpoint ck;
    ck.model = make_model<double>(mc, init, mean_rating);
    ck.mode = cfg.mode;
    ck.schedule = cfg.schedule;
    ck.ablated = cfg.ablate_diffusion;
    ck.vocab = vocab;
    ck.users = users;
    ck.items = items;

    ensure_directory(run_dir);
    open_output(run_dir / "config.json") << to_json(cfg).dump(2) << '\n';
    auto log = open_output(run_dir / "log.jsonl");

    train_config tc = cfg.train;
    tc.seed = cfg.seed;
    tc.ablate_diffusion = cfg.ablate_diffusion;
    trainer<double> tr(ck.model, make_schedule(cfg.schedule, mc.horizon), tc);
    fs::path last;
    auto write_checkpoint = [&](const epoch_log& e) {
        ck.meta = {{"epoch", e.epoch}, {"loss_total", e.loss_total}, {"lr", tr.state().lr},
                   {"counter", tr.state().counter}, {"best", tr.state().best}, {"stopped", tr.state().stop}};
        last = run_dir / ("epoch-" + std::to_string(e.epoch) + ".ckpt");
        save_checkpoint(ck, last.string());
    };
    std::optional<epoch_log> latest;
    tr.train(examples, [&](const epoch_log& e) {
        log << to_json(e).dump() << '\n';
        log.flush();
        latest = e;
        if (e.epoch % cfg.checkpoint_every == 0) write_checkpoint(e);
    });
    if (latest && latest->epoch % cfg.checkpoint_every != 0) write_checkpoint(*latest);
    return last;
}

/// generate: rating and reverse-sampled review for every record of a split.
/// The keyword mode is fixed by the checkpoint; asking for another is an error.
inline std::vector<prediction> cmd_generate(const run_config& cfg, const fs::path& checkpoint_path,
                                            const fs::path& data_dir, const std::string& split,
                                            const fs::path& out_path, std::optional<keyword_mode> mode = {}) {
    cfg.validate();
    const auto ck = load_checkpoint(checkpoint_path.string());
    if (mode && *mode != ck.mode)
        throw validation_error("generate: checkpoint was trained with mode " + std::string(to_string(ck.mode)) +
                               ", not " + std::string(to_string(*mode)));
    const auto data = load_split(data_dir, split);
    const auto examples = make_examples(data, ck.vocab, ck.users, ck.items, ck.mode, ck.model.config);
    const auto schedule = make_schedule(ck.schedule, ck.model.config.horizon);
    sample_options opts;
    opts.stride = cfg.stride;
    opts.ablated = ck.ablated;
    rng_type rng = seed_streams(cfg.seed).stream("sampler");
    std::vector<prediction> out;
    out.reserve(examples.size());
    for (const auto& ex : examples) {
        const auto enc = encode_states(ck.model, ex.persona);
        const auto s = reverse_sample(ck.model, ex.user, ex.item, ex.keywords, enc, schedule, opts, rng);
        out.push_back(prediction{ex.id, s.rating, ck.vocab.decode(s.tokens)});
    }
    if (!out_path.empty()) {
        if (out_path.has_parent_path()) ensure_directory(out_path.parent_path());
        save_predictions(out, out_path.string());
    }
    return out;
}

/// evaluate: predictions joined to references by record id.
inline metric_report cmd_evaluate(const fs::path& predictions, const fs::path& references,
                                  const fs::path& lexicon) {
    const auto preds = load_predictions(predictions.string());
    const auto refs = load_records(references.string());
    const auto lex = read_lines(lexicon);
    const auto pairs = join_by_id(preds, refs);
    return evaluate_pairs(pairs, lex);
}

}  // namespace dexr
