// Command-line front end: gen-data, build-profiles, train, generate, evaluate.
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "dexr/cli/commands.hpp"

namespace {

int fail(const std::string& kind, const std::string& message) {
    nlohmann::ordered_json j;
    j["error"] = kind;
    j["message"] = message;
    std::cerr << j.dump() << '\n';
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Diffusion-based explainable recommendation toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode;
    std::optional<std::size_t> stride;
    bool ablate = false;
    app.add_option("--config", config_path, "Flat JSON run configuration");
    app.add_option("--seed", seed, "Root seed");
    app.add_option("--mode", mode, "Keyword mode")->check(CLI::IsMember({"none", "F", "FO"}));
    app.add_option("--stride", stride, "Reverse sampling stride")->check(CLI::PositiveNumber);
    app.add_flag("--ablate-diffusion", ablate, "Train and sample without noise (t = 0)");

    std::string data_dir = "data";
    std::string run_dir;
    std::string checkpoint_path, split = "test", out_path;
    std::string predictions, references, lexicon, csv_path;
    std::optional<std::size_t> k, epochs;
    std::optional<std::string> ranking;

    auto* gen = app.add_subcommand("gen-data", "Generate the synthetic corpus and its 8:1:1 split");
    gen->add_option("--out", data_dir, "Output directory")->required();

    auto* prof = app.add_subcommand("build-profiles", "Build the vocabulary and per-split profiles");
    prof->add_option("--data", data_dir, "Dataset directory")->required();
    prof->add_option("--k", k, "Sentences per profile")->check(CLI::PositiveNumber);
    prof->add_option("--ranking", ranking, "Profile ranking")->check(CLI::IsMember({"similarity", "recency"}));

    auto* train = app.add_subcommand("train", "Train a model; writes <run>/epoch-<k>.ckpt and <run>/log.jsonl");
    train->add_option("--data", data_dir, "Dataset directory")->required();
    train->add_option("--run", run_dir, "Run directory, e.g. run/<name>")->required();
    train->add_option("--epochs", epochs, "Epoch cap")->check(CLI::PositiveNumber);

    auto* gen_text = app.add_subcommand("generate", "Predict ratings and sample reviews for a split");
    gen_text->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
    gen_text->add_option("--data", data_dir, "Dataset directory")->required();
    gen_text->add_option("--split", split, "Split name")->check(CLI::IsMember({"train", "valid", "test"}));
    gen_text->add_option("--out", out_path, "Predictions JSONL")->required();

    auto* eval = app.add_subcommand("evaluate", "Score predictions against reference records");
    eval->add_option("--predictions", predictions, "Predictions JSONL")->required();
    eval->add_option("--references", references, "Reference records JSONL")->required();
    eval->add_option("--lexicon", lexicon, "Feature lexicon, one token per line")->required();
    eval->add_option("--out", out_path, "Write the report JSON here as well as stdout");
    eval->add_option("--csv", csv_path, "Append a CSV row (header written when the file is new)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage_error", e.what());
    }

    try {
        dexr::run_config cfg;
        if (!config_path.empty()) cfg = dexr::load_run_config(config_path);
        if (seed) cfg.seed = *seed;
        if (mode) cfg.mode = dexr::parse_keyword_mode(*mode);
        if (stride) cfg.stride = *stride;
        if (ablate) cfg.ablate_diffusion = true;
        if (k) cfg.profile_k = *k;
        if (ranking) cfg.ranking = *ranking;
        if (epochs) cfg.train.max_epochs = *epochs;
        cfg.validate();

        if (*gen) {
            dexr::cmd_gen_data(cfg, data_dir);
        } else if (*prof) {
            dexr::cmd_build_profiles(cfg, data_dir);
        } else if (*train) {
            const auto last = dexr::cmd_train(cfg, data_dir, run_dir);
            std::cout << nlohmann::json{{"checkpoint", last.string()}}.dump() << '\n';
        } else if (*gen_text) {
            std::optional<dexr::keyword_mode> want;
            if (mode) want = cfg.mode;
            dexr::cmd_generate(cfg, checkpoint_path, data_dir, split, out_path, want);
        } else if (*eval) {
            const auto report = dexr::cmd_evaluate(predictions, references, lexicon);
            const auto text = dexr::to_json(report).dump(2);
            std::cout << text << '\n';
            if (!out_path.empty()) dexr::open_output(out_path) << text << '\n';
            if (!csv_path.empty()) {
                const bool fresh = !std::filesystem::exists(csv_path);
                std::ofstream csv(csv_path, std::ios::app);
                if (!csv) throw dexr::error("cannot write '" + csv_path + "'");
                if (fresh) csv << dexr::csv_header(report) << '\n';
                csv << dexr::csv_row(report) << '\n';
            }
        }
    } catch (const dexr::parse_error& e) {
        return fail("parse_error", e.what());
    } catch (const dexr::validation_error& e) {
        return fail("validation_error", e.what());
    } catch (const dexr::error& e) {
        return fail("error", e.what());
    } catch (const std::exception& e) {
        return fail("internal_error", e.what());
    }
    return 0;
}
