#include "doctest.h"
#include "toolken/common.hpp"
#include "toolken/lm.hpp"

using namespace toolken;

TEST_CASE("toy tokenizer splits digits and keeps known words whole") {
    ToyLM lm;
    const auto& tok = lm.toy_tokenizer();
    auto ids = lm.tokenize("the area is 256 square feet");
    std::vector<std::string> texts;
    for (auto id : ids) texts.push_back(tok.token_text(id));
    // digits always come apart; 'the', 'is', 'square' are single pieces
    CHECK(std::count(texts.begin(), texts.end(), "2") == 1);
    CHECK(std::count(texts.begin(), texts.end(), "5") == 1);
    CHECK(std::count(texts.begin(), texts.end(), "6") == 1);
    CHECK(std::count(texts.begin(), texts.end(), "the") == 1);
    CHECK(std::count(texts.begin(), texts.end(), "square") == 1);
    CHECK(lm.detokenize(ids) == "the area is 256 square feet");
}

TEST_CASE("extra pieces make digit runs single tokens") {
    ToyConfig cfg;
    cfg.extra_pieces = {"256"};
    ToyLM lm(cfg);
    auto ids = lm.tokenize("the area is 256 square feet");
    size_t digit_tokens = 0, merged = 0;
    for (auto id : ids) {
        const std::string t = lm.toy_tokenizer().token_text(id);
        if (t == "256") ++merged;
        if (t.size() == 1 && t[0] >= '0' && t[0] <= '9') ++digit_tokens;
    }
    CHECK(merged == 1);
    CHECK(digit_tokens == 0);
    // boundary rule: the piece does not fire inside a longer run
    auto ids2 = lm.tokenize("12565");
    for (auto id : ids2) CHECK(lm.toy_tokenizer().token_text(id).size() == 1);
}

TEST_CASE("tokenize/detokenize round-trips arbitrary ascii") {
    ToyLM lm;
    Rng rng(42);
    for (int trial = 0; trial < 50; ++trial) {
        std::string s;
        for (int i = 0; i < 80; ++i) s.push_back(char(rng.uniform_int(32, 126)));
        CHECK(lm.detokenize(lm.tokenize(s)) == s);
    }
}

TEST_CASE("tokenizer vocabulary is capped at 512") {
    ToyConfig cfg;
    for (int i = 0; i < 60; ++i) cfg.extra_pieces.push_back("zz" + std::to_string(i));
    CHECK_THROWS_AS(ToyLM{cfg}, UsageError);
}

TEST_CASE("same seed means identical fingerprints and outputs") {
    ToyLM a, b;
    CHECK(a.fingerprint() == b.fingerprint());
    ToyConfig other;
    other.seed = 8;
    ToyLM c(other);
    CHECK(a.fingerprint() != c.fingerprint());

    auto ids = a.tokenize("What is 12 plus 7?");
    auto out1 = a.forward(ids);
    auto out2 = b.forward(ids);
    REQUIRE(out1.size() == out2.size());
    for (size_t i = 0; i < out1.size(); ++i) {
        CHECK(out1[i].hidden == out2[i].hidden);
        CHECK(out1[i].word_logits == out2[i].word_logits);
    }
}

TEST_CASE("causality: a later token never changes earlier outputs") {
    ToyLM lm;
    auto abc = lm.tokenize("abcq");
    auto abd = lm.tokenize("abcz");
    auto o1 = lm.forward(abc);
    auto o2 = lm.forward(abd);
    for (size_t i = 0; i + 1 < o1.size(); ++i) {
        CHECK(o1[i].hidden == o2[i].hidden);
        CHECK(o1[i].word_logits == o2[i].word_logits);
    }

    Rng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<uint32_t> base;
        for (int i = 0; i < 20; ++i)
            base.push_back(uint32_t(rng.uniform_int(1, lm.vocab_size() - 1)));
        auto mutated = base;
        size_t j = size_t(rng.uniform_int(5, 19));
        mutated[j] = uint32_t(rng.uniform_int(1, lm.vocab_size() - 1));
        auto ob = lm.forward(base);
        auto om = lm.forward(mutated);
        for (size_t i = 0; i < j; ++i) CHECK(ob[i].hidden == om[i].hidden);
    }
}

TEST_CASE("word logits equal the head applied to the hidden state") {
    ToyLM lm;
    auto ids = lm.tokenize("Question: What is 3 plus 4?\nAnswer: The answer is ");
    auto out = lm.forward(ids);
    for (size_t i = 0; i < out.size(); i += 7)
        CHECK(out[i].word_logits == lm.head_logits(out[i].hidden));
}

TEST_CASE("hidden states are finite with the documented dimension") {
    ToyLM lm;
    CHECK(lm.hidden_dim() == 128);
    auto out = lm.forward(lm.tokenize("some words and 123 numbers"));
    for (const auto& step : out) {
        CHECK(step.hidden.size() == lm.hidden_dim());
        for (float v : step.hidden) CHECK(std::isfinite(v));
    }
}

TEST_CASE("forward rejects unknown ids, empty input and over-long contexts") {
    ToyConfig cfg;
    cfg.max_context = 8;
    ToyLM lm(cfg);
    CHECK_THROWS_AS(lm.forward(std::vector<uint32_t>{}), DataError);
    CHECK_THROWS_AS(lm.forward(std::vector<uint32_t>{lm.vocab_size()}), DataError);
    std::vector<uint32_t> long_ids(9, 5);
    CHECK_THROWS_AS(lm.forward(long_ids), DataError);
}

TEST_CASE("argument-copy layer completes numeric calls from the question") {
    ToyLM lm;
    const std::string prompt =
        "Question: What is the least common multiple of 4 and 6?\n"
        "Answer: The answer is [lcm](4, 6)=12.\n"
        "Question: What is the least common multiple of 9 and 15?\n"
        "Answer: The answer is [lcm](9, 15)=45.\n"
        "Question: What is the least common multiple of 8 and 10?\n"
        "Answer: The answer is [lcm](";
    auto session = lm.start_session();
    for (uint32_t id : lm.tokenize(prompt)) session->append(id);
    std::string generated;
    for (int i = 0; i < 16; ++i) {
        WordLogits wl = session->current_word_logits();
        uint32_t best = 0;
        for (uint32_t id = 1; id < wl.size(); ++id)
            if (wl[id] > wl[best]) best = id;
        if (best == lm.eos_id()) break;
        session->append(best);
        std::array<uint32_t, 1> one{best};
        generated += lm.detokenize(one);
        if (generated.find(')') != std::string::npos) break;
    }
    CHECK(generated == "8, 10)");
}

TEST_CASE("argument-copy respects the demonstrated arity") {
    ToyLM lm;
    // one-argument demonstrations: only the first question number is copied
    const std::string prompt =
        "Question: What is 4 times 4?\nAnswer: The answer is [square](4)=16.\n"
        "Question: What is 16 times 16?\nAnswer: The answer is [square](";
    auto session = lm.start_session();
    for (uint32_t id : lm.tokenize(prompt)) session->append(id);
    std::string generated;
    for (int i = 0; i < 12; ++i) {
        WordLogits wl = session->current_word_logits();
        uint32_t best = 0;
        for (uint32_t id = 1; id < wl.size(); ++id)
            if (wl[id] > wl[best]) best = id;
        if (best == lm.eos_id()) break;
        session->append(best);
        std::array<uint32_t, 1> one{best};
        generated += lm.detokenize(one);
        if (generated.find(')') != std::string::npos) break;
    }
    CHECK(generated == "16)");
}

TEST_CASE("argument-copy layer aligns entity slots against demonstrations") {
    ToyLM lm;
    const std::string prompt =
        "Question: Who is the winner of 1998 World Cup?\n"
        "Answer: The answer is [winner_of](1998 World Cup)=France.\n"
        "Question: Who is the winner of Tour 2011?\n"
        "Answer: The answer is [winner_of](Tour 2011)=Cadel Evans.\n"
        "Question: Who is the winner of 2005-06 FA Cup?\n"
        "Answer: The answer is [winner_of](";
    auto session = lm.start_session();
    for (uint32_t id : lm.tokenize(prompt)) session->append(id);
    std::string generated;
    for (int i = 0; i < 32; ++i) {
        WordLogits wl = session->current_word_logits();
        uint32_t best = 0;
        for (uint32_t id = 1; id < wl.size(); ++id)
            if (wl[id] > wl[best]) best = id;
        if (best == lm.eos_id()) break;
        session->append(best);
        std::array<uint32_t, 1> one{best};
        generated += lm.detokenize(one);
        if (!generated.empty() && generated.back() == ')') break;
    }
    CHECK(generated == "2005-06 FA Cup)");
}

TEST_CASE("scripted backend answers scripted prefixes and rejects the rest") {
    ScriptedLM lm(260, 4);
    HiddenState h5 = {1, 0, 0, 0};
    WordLogits l5(260, 0.0f);
    l5[9] = 3.0f;
    lm.script({5}, h5, l5);
    HiddenState h59 = {0, 1, 0, 0};
    WordLogits l59(260, 0.0f);
    lm.script({5, 9}, h59, l59);

    auto out = lm.forward(std::vector<uint32_t>{5, 9});
    CHECK(out.size() == 2);
    CHECK(out[0].hidden == h5);
    CHECK(out[1].hidden == h59);
    CHECK_THROWS_AS(lm.forward(std::vector<uint32_t>{5, 8}), DataError);
    CHECK(lm.head_logits(h5) == l5);
    HiddenState unknown = {9, 9, 9, 9};
    CHECK_THROWS_AS(lm.head_logits(unknown), DataError);
}
