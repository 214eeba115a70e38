#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <string>

#include "dexr/corpus/embedder.hpp"
#include "dexr/corpus/profiles.hpp"
#include "dexr/corpus/record.hpp"
#include "dexr/corpus/synthetic.hpp"
#include "dexr/corpus/text.hpp"
#include "dexr/corpus/vocabulary.hpp"

using namespace dexr;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("dexr_corpus_" + name)).string();
}

interaction_record rec(std::string id, std::string user, std::string item, double rating, std::string text) {
    return interaction_record{std::move(id), std::move(user), std::move(item), rating, tokenize(text), {}, {}};
}

// One-hot word vectors: sentences made of distinct single tokens are orthogonal.
mean_vector_embedder one_hot_embedder(const vocabulary& v) {
    auto table = tensor::matrix(v.size(), v.size());
    for (std::size_t i = 0; i < v.size(); ++i) table(i, i) = 1.0;
    return mean_vector_embedder(v, table);
}

}  // namespace

TEST(Tokenize, LowercasesAndSplits) {
    EXPECT_EQ(tokenize("Very nice piece of jewelry"), (token_list{"very", "nice", "piece", "of", "jewelry"}));
}

TEST(Tokenize, EmptyTextGivesNoTokens) { EXPECT_TRUE(tokenize("").empty()); }

TEST(Tokenize, StripsPunctuation) { EXPECT_EQ(tokenize("A!!! a"), (token_list{"a", "a"})); }

TEST(Tokenize, KeepsUtf8Bytes) { EXPECT_EQ(tokenize("Caf\xc3\xa9, ok"), (token_list{"caf\xc3\xa9", "ok"})); }

TEST(Tokenize, NeverProducesReservedMarkers) {
    for (const auto& t : tokenize("<pad> <bos> <eos> <unk>")) {
        const vocabulary v;
        EXPECT_FALSE(t == "<pad>" || t == "<bos>" || t == "<eos>" || t == "<unk>") << t;
    }
}

TEST(Vocabulary, ReservedIdsComeFirst) {
    const vocabulary v;
    EXPECT_EQ(v.size(), 4u);
    EXPECT_EQ(v.decode(vocabulary::pad_id), "<pad>");
    EXPECT_EQ(v.decode(vocabulary::bos_id), "<bos>");
    EXPECT_EQ(v.decode(vocabulary::eos_id), "<eos>");
    EXPECT_EQ(v.decode(vocabulary::unk_id), "<unk>");
}

TEST(Vocabulary, DescendingFrequencyAfterReserved) {
    const auto v = build_vocab_from_sentences({tokenize("a a b")}, 1);
    EXPECT_EQ(v.encode("a"), 4);
    EXPECT_EQ(v.encode("b"), 5);
    EXPECT_EQ(v.size(), 6u);
}

TEST(Vocabulary, ThresholdCanExcludeEverything) {
    const auto v = build_vocab_from_sentences({tokenize("a")}, 2);
    EXPECT_EQ(v.size(), 4u);
    EXPECT_EQ(v.encode("a"), vocabulary::unk_id);
}

TEST(Vocabulary, RejectsEmptyCorpusAndZeroThreshold) {
    EXPECT_THROW(build_vocab_from_sentences({}, 1), validation_error);
    EXPECT_THROW(build_vocab_from_sentences({tokenize("a")}, 0), validation_error);
}

TEST(Vocabulary, EncodeDecodeIsBijective) {
    const auto v = build_vocab_from_sentences({tokenize("the fit is great"), tokenize("great color")}, 1);
    for (const auto& t : v.regular_tokens()) EXPECT_EQ(v.decode(v.encode(t)), t);
    EXPECT_EQ(v.encode("never-seen"), vocabulary::unk_id);
}

TEST(Vocabulary, FileRoundTripUsesLinePlusFour) {
    const auto v = build_vocab_from_sentences({tokenize("x y y z z z")}, 1);
    const auto path = temp_path("vocab.txt");
    v.save(path);
    std::ifstream in(path);
    std::string first;
    std::getline(in, first);
    EXPECT_EQ(first, "z");
    EXPECT_EQ(vocabulary::load(path), v);
}

TEST(Vocabulary, KeywordsAreAlwaysEncodable) {
    record_set rs{rec("0", "u", "i", 4, "nice fit")};
    rs[0].feature = "zipper";
    rs[0].opinion = "shiny";
    const auto v = build_vocab(rs, 1);
    EXPECT_NE(v.encode("zipper"), vocabulary::unk_id);
    EXPECT_NE(v.encode("shiny"), vocabulary::unk_id);
}

TEST(Records, JsonlRoundTripIsLossless) {
    auto corpus = synth_generate([] {
        synthetic_spec s;
        s.num_users = 12;
        s.num_items = 9;
        return s;
    }());
    corpus.records.push_back(rec("extra", "u0", "i0", 1.0, "plain text no keywords"));
    const auto path = temp_path("records.jsonl");
    save_records(corpus.records, path);
    EXPECT_EQ(load_records(path), corpus.records);
}

TEST(Records, MissingRatingIsParseErrorAtLine) {
    const auto path = temp_path("bad.jsonl");
    {
        std::ofstream out(path);
        out << R"({"user":"u","item":"i","rating":4,"review":"ok"})" << '\n';
        out << R"({"user":"u","item":"i","review":"ok"})" << '\n';
    }
    try {
        load_records(path);
        FAIL() << "expected parse_error";
    } catch (const parse_error& e) {
        EXPECT_EQ(e.line(), 2u);
    }
}

TEST(Records, RatingOutsideRangeIsValidationError) {
    EXPECT_THROW(record_from_json(R"({"user":"u","item":"i","rating":5.5,"review":"ok"})", 1), validation_error);
    EXPECT_THROW(record_from_json(R"({"user":"u","item":"i","rating":0.5,"review":"ok"})", 1), validation_error);
}

TEST(Records, MalformedJsonNamesLine) {
    try {
        record_from_json("{not json", 7);
        FAIL();
    } catch (const parse_error& e) {
        EXPECT_EQ(e.line(), 7u);
    }
}

TEST(Records, TokenizeDetokenizeRoundTrip) {
    const auto corpus = synth_generate(synthetic_spec::amazon_like());
    for (const auto& r : corpus.records) EXPECT_EQ(tokenize(detokenize(r.review)), r.review);
}

TEST(Embedder, SingleTokenGivesNormalisedRow) {
    const auto v = vocabulary::from_tokens({"a"});
    auto table = tensor::matrix(v.size(), 2);
    table(4, 0) = 3.0;
    table(4, 1) = 4.0;
    const mean_vector_embedder e(v, table);
    const auto x = e.embed({"a"});
    EXPECT_DOUBLE_EQ(x[0], 0.6);
    EXPECT_DOUBLE_EQ(x[1], 0.8);
}

TEST(Embedder, IdenticalSentencesHaveCosineOne) {
    const auto v = vocabulary::from_tokens({"a", "b", "c"});
    const auto e = mean_vector_embedder::random(v, 8, 1);
    const auto x = e.embed(tokenize("a b c"));
    EXPECT_NEAR(cosine_of_unit(x, e.embed(tokenize("a b c"))), 1.0, 1e-15);
}

TEST(Embedder, OrthogonalTokensHaveCosineZero) {
    const auto v = vocabulary::from_tokens({"a", "b"});
    const auto e = one_hot_embedder(v);
    EXPECT_EQ(cosine_of_unit(e.embed({"a"}), e.embed({"b"})), 0.0);
}

TEST(Embedder, UnknownTokensUseUnkRowAndEmptyIsError) {
    const auto v = vocabulary::from_tokens({"a"});
    const auto e = one_hot_embedder(v);
    const auto x = e.embed({"zzz"});
    EXPECT_EQ(x[vocabulary::unk_id], 1.0);
    EXPECT_THROW(e.embed({}), validation_error);
}

TEST(Profiles, SingleHistoryIsRepeatedToK) {
    record_set split{rec("t", "u", "i", 4, "a b"), rec("h", "u", "j", 3, "b c"), rec("x", "w", "i", 2, "c")};
    const auto v = build_vocab(split, 1);
    const auto e = one_hot_embedder(v);
    const auto [pu, pi] = build_profiles(split, split[0], e, profile_options{3});
    ASSERT_EQ(pu.sentences.size(), 3u);
    for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_EQ(pu.sentences[j], tokenize("b c"));
        EXPECT_EQ(pu.scores[j], pu.scores[0]);
        EXPECT_EQ(pi.sentences[j], tokenize("c"));
    }
}

TEST(Profiles, IdenticalHistoryRanksFirstWithScoreOne) {
    std::mt19937_64 rng(3);
    const token_list words{"fit", "color", "soft", "cheap", "great", "size", "zip", "wide"};
    record_set split;
    for (int n = 0; n < 12; ++n) {
        token_list review;
        for (int w = 0; w < 4; ++w) review.push_back(words[rng() % words.size()]);
        split.push_back({"h" + std::to_string(n), "u", "i" + std::to_string(n), 3.0, review, {}, {}});
    }
    auto target = split[5];
    target.id = "target";
    target.item = "i0";
    split.push_back(target);
    const auto v = build_vocab(split, 1);
    const auto e = mean_vector_embedder::random(v, 16, 9);
    const auto [pu, pi] = build_profiles(split, target, e, profile_options{5});
    // brute-force ranking over all user candidates
    const auto tv = e.embed(target.review);
    double best = -2.0;
    for (const auto& r : split)
        if (r.user == "u" && r.id != "target") best = std::max(best, cosine_of_unit(tv, e.embed(r.review)));
    EXPECT_EQ(pu.sentences[0], target.review);
    EXPECT_NEAR(pu.scores[0], 1.0, 1e-12);
    EXPECT_EQ(pu.scores[0], best);
    EXPECT_TRUE(std::is_sorted(pu.scores.rbegin(), pu.scores.rend()));
    for (const auto& src : pu.sources) EXPECT_NE(src, "target");
}

TEST(Profiles, AbsentOwnerIsErrorNamingId) {
    record_set split{rec("a", "u1", "i1", 4, "x"), rec("b", "u1", "i1", 4, "y")};
    const auto v = build_vocab(split, 1);
    const auto e = one_hot_embedder(v);
    auto ghost = rec("g", "ghost-user", "i1", 3, "x");
    try {
        build_profiles(split, ghost, e);
        FAIL();
    } catch (const validation_error& err) {
        EXPECT_NE(std::string(err.what()).find("ghost-user"), std::string::npos);
    }
}

TEST(Profiles, InvariantToCandidateOrder) {
    synthetic_spec s;
    s.num_users = 20;
    s.num_items = 10;
    s.records_per_user = 6;
    const auto corpus = synth_generate(s);
    const auto v = build_vocab(corpus.records, 1);
    const auto e = mean_vector_embedder::random(v, 8, 4);
    auto shuffled = corpus.records;
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 5; ++trial) {
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        const auto a = build_profile_table(corpus.records, e, profile_options{4});
        const auto b = build_profile_table(shuffled, e, profile_options{4});
        EXPECT_EQ(a.by_record, b.by_record);
    }
}

TEST(Profiles, FallbackPoolOnlyWhenSplitHasNoHistory) {
    record_set train{rec("t1", "u", "i", 4, "a"), rec("t2", "u", "j", 4, "b")};
    record_set test{rec("s1", "u", "i", 4, "a b"), rec("s2", "v", "i", 2, "c")};
    const auto v = build_vocab(train, 1);
    const auto e = one_hot_embedder(v);
    profile_builder<mean_vector_embedder> builder(test, e, &train);
    const auto [pu, pi] = builder.build(test[0], profile_options{2});
    // user u has no other test history: training history is used
    EXPECT_TRUE(pu.sources[0] == "t1" || pu.sources[0] == "t2");
    // item i has s2 in the test split itself
    EXPECT_EQ(pi.sources, (std::vector<std::string>{"s2", "s2"}));
    // user v has no history anywhere
    const auto [pv, unused] = builder.build(test[1], profile_options{2});
    EXPECT_EQ(pv.sentences[0], (token_list{"<unk>"}));
    EXPECT_EQ(pv.sources[0], "");
}

TEST(Profiles, RecencyRankingPutsLatestFirst) {
    record_set split{rec("a", "u", "i", 4, "x"), rec("b", "u", "j", 4, "y"), rec("c", "u", "k", 4, "z"),
                     rec("d", "w", "i", 4, "q")};
    const auto v = build_vocab(split, 1);
    const auto e = one_hot_embedder(v);
    const auto [pu, pi] = build_profiles(split, split[0], e, profile_options{2, profile_ranking::recency});
    EXPECT_EQ(pu.sources, (std::vector<std::string>{"c", "b"}));
}

TEST(Profiles, FileRoundTrip) {
    synthetic_spec s;
    s.num_users = 15;
    s.num_items = 8;
    const auto corpus = synth_generate(s);
    const auto v = build_vocab(corpus.records, 1);
    const auto e = mean_vector_embedder::random(v, 8, 2);
    const auto table = build_profile_table(corpus.records, e, profile_options{3});
    const auto path = temp_path("profiles.jsonl");
    save_profiles(table, corpus.records, path);
    const auto back = load_profiles(path);
    ASSERT_EQ(back.by_record.size(), table.by_record.size());
    for (const auto& [id, pair] : table.by_record) {
        const auto& other = back.at(id);
        EXPECT_EQ(other.first.sentences, pair.first.sentences);
        EXPECT_EQ(other.second.sources, pair.second.sources);
        EXPECT_EQ(other.first.scores, pair.first.scores);
    }
}

TEST(Synthetic, SameSeedIsByteIdentical) {
    const auto a = synth_generate(synthetic_spec::amazon_like());
    const auto b = synth_generate(synthetic_spec::amazon_like());
    const auto pa = temp_path("syn_a.jsonl"), pb = temp_path("syn_b.jsonl");
    save_records(a.records, pa);
    save_records(b.records, pb);
    std::ifstream fa(pa), fb(pb);
    const std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
    EXPECT_EQ(sa, sb);
    auto other = synthetic_spec::amazon_like();
    other.seed = 8;
    EXPECT_NE(synth_generate(other).records, a.records);
}

TEST(Synthetic, ZeroNoiseGivesClippedAffineRating) {
    auto s = synthetic_spec::amazon_like();
    s.rating_noise_std = 0.0;
    const auto c = synth_generate(s);
    for (std::size_t i = 0; i < c.records.size(); ++i)
        EXPECT_EQ(c.records[i].rating, std::clamp(s.rating_offset + s.rating_scale * c.affinity[i], 1.0, 5.0));
}

TEST(Synthetic, DefaultShapeIsDeskScale) {
    const auto s = synthetic_spec::amazon_like();
    EXPECT_EQ(s.num_users, 388u);
    EXPECT_EQ(s.num_items, 229u);
    const auto c = synth_generate(s);
    std::set<std::string> users, items;
    for (const auto& r : c.records) {
        users.insert(r.user);
        items.insert(r.item);
    }
    EXPECT_EQ(users.size(), 388u);
    EXPECT_EQ(items.size(), 229u);
    EXPECT_NEAR(double(c.records.size()) / 388.0, s.records_per_user, 0.01);
}

TEST(Synthetic, ReviewsPlantExactlyOneFeatureAndOpinion) {
    const auto c = synth_generate(synthetic_spec::amazon_like());
    const std::set<std::string> lexicon(c.feature_lexicon.begin(), c.feature_lexicon.end());
    for (const auto& r : c.records) {
        ASSERT_TRUE(r.feature && r.opinion);
        EXPECT_EQ(std::count(r.review.begin(), r.review.end(), *r.feature), 1);
        EXPECT_EQ(std::count(r.review.begin(), r.review.end(), *r.opinion), 1);
        std::size_t planted = 0;
        for (const auto& t : r.review) planted += lexicon.count(t);
        EXPECT_EQ(planted, 1u);
        const auto& bucket = synthetic_words::opinions[opinion_bucket(r.rating)];
        EXPECT_NE(std::find(bucket.begin(), bucket.end(), *r.opinion), bucket.end());
    }
}

// Oracle: given each record's affinity a, the rating is clip(offset + scale a
// + sigma Z, 1, 5), whose mean and variance have closed forms in the normal
// cdf/pdf. The empirical mean must sit within 3 standard errors.
TEST(Synthetic, MeanRatingMatchesClippedNormalExpectation) {
    synthetic_spec s;
    s.num_users = 2500;
    s.num_items = 600;
    s.records_per_user = 4.0;
    s.seed = 21;
    const auto c = synth_generate(s);
    ASSERT_GE(c.records.size(), 10000u);
    auto Phi = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
    auto phi = [](double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); };
    const double sd = s.rating_noise_std;
    double expected = 0.0, variance = 0.0, observed = 0.0;
    for (std::size_t i = 0; i < c.records.size(); ++i) {
        const double mu = s.rating_offset + s.rating_scale * c.affinity[i];
        const double a = (1.0 - mu) / sd, b = (5.0 - mu) / sd;
        const double mid = Phi(b) - Phi(a);
        const double m1 = 1.0 * Phi(a) + 5.0 * (1.0 - Phi(b)) + mu * mid + sd * (phi(a) - phi(b));
        const double m2 = 1.0 * Phi(a) + 25.0 * (1.0 - Phi(b)) + mu * mu * mid + 2.0 * mu * sd * (phi(a) - phi(b)) +
                          sd * sd * (mid + a * phi(a) - b * phi(b));
        expected += m1;
        variance += m2 - m1 * m1;
        observed += c.records[i].rating;
    }
    const double n = double(c.records.size());
    const double se = std::sqrt(variance) / n;
    EXPECT_LT(std::abs(observed / n - expected / n), 3.0 * se)
        << "observed " << observed / n << " expected " << expected / n << " se " << se;
}

TEST(Split, DisjointCompleteAndCovering) {
    const auto c = synth_generate(synthetic_spec::amazon_like());
    const auto s = split_records(c.records, 5);
    const std::size_t n = c.records.size();
    EXPECT_EQ(s.train.size() + s.valid.size() + s.test.size(), n);
    EXPECT_NEAR(double(s.train.size()), 0.8 * double(n), 1.0);
    EXPECT_NEAR(double(s.valid.size()), 0.1 * double(n), 1.0);
    std::set<std::string> ids, users, items;
    for (const auto* part : {&s.train, &s.valid, &s.test})
        for (const auto& r : *part) EXPECT_TRUE(ids.insert(r.id).second) << r.id;
    for (const auto& r : s.train) {
        users.insert(r.user);
        items.insert(r.item);
    }
    for (const auto* part : {&s.valid, &s.test})
        for (const auto& r : *part) {
            EXPECT_TRUE(users.count(r.user));
            EXPECT_TRUE(items.count(r.item));
        }
    EXPECT_EQ(split_records(c.records, 5).test, s.test);
}
