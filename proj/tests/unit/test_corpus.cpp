#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"

#include "css/corpus.hpp"
#include "css/dialogue_act.hpp"
#include "css/errors.hpp"
#include "css/random.hpp"
#include "css/vocabulary.hpp"

using namespace css;

namespace {

const std::string kFixtures = std::string(CSS_SOURCE_DIR) + "/tests/fixtures";

using Tokens = std::vector<std::string>;

DialoguePair make_pair(std::size_t utt_len, std::size_t resp_len, int base = 4) {
  DialoguePair p;
  for (std::size_t i = 0; i < utt_len; ++i) p.utterance.ids.push_back(base + static_cast<int>(i % 7));
  for (std::size_t i = 0; i < resp_len; ++i) p.response.ids.push_back(base + static_cast<int>(i % 5));
  p.utterance.original_length = utt_len;
  p.response.original_length = resp_len;
  return p;
}

}  // namespace

TEST_CASE("tokenize") {
  CHECK(tokenize("How are you?") == Tokens{"how", "are", "you", "?"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("[Laughter]") == Tokens{"[laughter]"});
  CHECK(tokenize("  Don't   stop,uh-huh!  ") == Tokens{"don't", "stop", ",", "uh-huh", "!"});
  CHECK(tokenize("[ I, + I ]") == Tokens{"[", "i", ",", "+", "i", "]"});
  CHECK(tokenize("'quoted'") == Tokens{"'", "quoted", "'"});
}

TEST_CASE("vocabulary: frequency order and tie rule") {
  std::vector<Tokens> corpus{{"a", "a", "b"}};
  auto v = Vocabulary::build(corpus, 6);
  CHECK(v.size() == 6);
  CHECK(v.id("a") == 4);
  CHECK(v.id("b") == 5);

  std::vector<Tokens> ties{{"c", "b", "z", "z"}};
  auto t = Vocabulary::build(ties, 7);
  CHECK(t.id("z") == 4);
  CHECK(t.id("b") == 5);
  CHECK(t.id("c") == 6);

  auto t2 = Vocabulary::build(ties, 7);
  CHECK(t == t2);

  auto small = Vocabulary::build(ties, 5);
  CHECK(small.size() == 5);
  CHECK(small.id("b") == kUnkId);

  CHECK_THROWS_AS(Vocabulary::build(ties, 4), std::invalid_argument);
}

TEST_CASE("vocabulary: reserved ids and extra reserved words") {
  std::vector<std::string> extra{std::string(kSepToken)};
  std::vector<Tokens> corpus{{"x"}};
  auto v = Vocabulary::build(corpus, 10, extra);
  CHECK(v.token(kPadId) == kPadToken);
  CHECK(v.token(kUnkId) == kUnkToken);
  CHECK(v.token(kSosId) == kSosToken);
  CHECK(v.token(kEosId) == kEosToken);
  CHECK(v.id(kSepToken) == 4);
  CHECK(v.id("x") == 5);
  CHECK(Vocabulary::from_tokens(v.tokens()) == v);
  CHECK_THROWS(Vocabulary::from_tokens({"a", "b"}));
}

TEST_CASE("encode / decode") {
  std::vector<Tokens> corpus{{"hello", "there", "friend"}};
  auto v = Vocabulary::build(corpus, 20);
  Tokens in{"hello", "friend"};
  auto seq = encode(v, in, 50);
  CHECK(decode(v, seq.ids) == in);
  CHECK(encode(v, Tokens{"stranger"}, 50).ids == std::vector<int>{kUnkId});

  Tokens long_input(60, "there");
  auto cut = encode(v, long_input, 50);
  CHECK(cut.size() == 50);
  CHECK(cut.original_length == 60);
  auto with_eos = encode(v, long_input, 50, true);
  CHECK(with_eos.size() == 50);
  CHECK(with_eos.ids.back() == kEosId);

  std::vector<int> bad{4, 99};
  CHECK_THROWS_AS(decode(v, bad), std::out_of_range);
  std::vector<int> padded{kSosId, 4, kEosId, 5, kPadId};
  CHECK(decode(v, padded) == Tokens{v.token(4)});
}

TEST_CASE("property: decode(encode(x)) == x for in-vocabulary lists") {
  Rng rng(17);
  std::vector<Tokens> corpus;
  Tokens words;
  for (int i = 0; i < 40; ++i) words.push_back("w" + std::to_string(i));
  corpus.push_back(words);
  auto v = Vocabulary::build(corpus, 100);
  for (int trial = 0; trial < 200; ++trial) {
    Tokens x;
    const auto n = rng.index(51);
    for (std::size_t i = 0; i < n; ++i) x.push_back(words[rng.index(words.size())]);
    CHECK(decode(v, encode(v, x, 50).ids) == x);
  }
}

TEST_CASE("window_concat") {
  std::vector<TokenSequence> h{{{4, 5}, 2}, {{6}, 1}, {{7, 8, 9}, 3}};
  const int sep = 10;
  CHECK(window_concat(std::span(h).subspan(2), 1, sep).ids == std::vector<int>{7, 8, 9});
  CHECK(window_concat(h, 1, sep).ids == std::vector<int>{7, 8, 9});
  CHECK(window_concat(h, 2, sep).ids == std::vector<int>{6, sep, 7, 8, 9});
  CHECK(window_concat(h, 5, sep).ids == std::vector<int>{4, 5, sep, 6, sep, 7, 8, 9});
  CHECK_THROWS(window_concat(h, 0, sep));

  std::vector<TokenSequence> longer(3);
  for (int i = 0; i < 30; ++i) {
    longer[0].ids.push_back(100 + i);
    longer[1].ids.push_back(200 + i);
    longer[2].ids.push_back(300 + i);
  }
  auto w = window_concat(longer, 2, sep);
  CHECK(w.size() == 50);
  CHECK(w.ids.back() == 329);
  CHECK(w.ids.front() == 211);  // 61 ids joined, the leftmost 11 dropped
  CHECK(w.original_length == 61);
}

TEST_CASE("cornell: fixture corpus") {
  auto c = parse_cornell(kFixtures + "/cornell/movie_lines.txt", kFixtures + "/cornell/movie_conversations.txt");
  CHECK(c.conversations.size() == 6);
  CHECK(c.pairs.size() == 12);
  CHECK(c.malformed_lines == 1);
  CHECK(c.unresolved_ids == 0);
  CHECK(c.pairs[0].utterance == "Can we make this quick?");
  CHECK(c.pairs[0].response == "Well, I thought we'd start with pronunciation.");
  for (std::size_t i = 1; i < c.pairs.size(); ++i) {
    if (c.pairs[i].conversation == c.pairs[i - 1].conversation) {
      CHECK(c.pairs[i].turn == c.pairs[i - 1].turn + 1);
      CHECK(c.pairs[i].utterance == c.pairs[i - 1].response);
    }
  }
}

TEST_CASE("cornell: small inputs") {
  const std::string d(kCornellDelimiter);
  std::istringstream lines("L1" + d + "u0" + d + "m0" + d + "A" + d + "Hi.\r\nL2" + d + "u1" + d + "m0" + d + "B" + d +
                           "Hello.\nL3" + d + "u0" + d + "m0" + d + "A" + d + "Bye.\nL4" + d + "u0" + d + "m0\n");
  std::istringstream convs("u0" + d + "u1" + d + "m0" + d + "['L1', 'L2', 'L3']\n");
  auto c = parse_cornell(lines, convs);
  REQUIRE(c.pairs.size() == 2);
  CHECK(c.pairs[0].utterance == "Hi.");
  CHECK(c.pairs[1].response == "Bye.");
  CHECK(c.malformed_lines == 1);

  std::istringstream lines2("L1" + d + "u0" + d + "m0" + d + "A" + d + "a\nL2" + d + "u0" + d + "m0" + d + "A" + d +
                            "b\nL4" + d + "u0" + d + "m0" + d + "A" + d + "d\nL5" + d + "u0" + d + "m0" + d + "A" + d +
                            "e\n");
  std::istringstream convs2("u0" + d + "u1" + d + "m0" + d + "['L1', 'L2', 'L3', 'L4', 'L5']\nbroken row\n");
  auto gap = parse_cornell(lines2, convs2);
  CHECK(gap.unresolved_ids == 1);
  CHECK(gap.malformed_conversations == 1);
  REQUIRE(gap.pairs.size() == 2);
  CHECK(gap.pairs[0].response == "b");
  CHECK(gap.pairs[1].utterance == "d");

  CHECK_THROWS_AS(parse_cornell(std::filesystem::path("/nonexistent/lines"), std::filesystem::path("/nonexistent/c")),
                  IoError);
}

TEST_CASE("csv records") {
  std::istringstream in("a,\"b,c\",\"say \"\"hi\"\"\"\r\n\"multi\nline\",x\n");
  std::vector<std::string> f;
  REQUIRE(read_csv_record(in, f));
  CHECK(f == std::vector<std::string>{"a", "b,c", "say \"hi\""});
  REQUIRE(read_csv_record(in, f));
  CHECK(f == std::vector<std::string>{"multi\nline", "x"});
  CHECK_FALSE(read_csv_record(in, f));
}

TEST_CASE("disfluency stripping") {
  CHECK(strip_disfluency("{D Well, } I think it's a great idea. /") == "Well, I think it's a great idea.");
  CHECK(strip_disfluency("[ I, + I ] have a dog. /") == "I, I have a dog.");
  CHECK(strip_disfluency("It's a {F uh, } beagle. /") == "It's a uh, beagle.");
  CHECK(strip_disfluency("<Laughter>.") == "[laughter]");
  CHECK(strip_disfluency("Yeah <laughter> right. /") == "Yeah right.");
  CHECK(strip_disfluency("They are so sweet -- /") == "They are so sweet");
  CHECK(strip_disfluency("[Laughter]") == "[Laughter]");
  CHECK(strip_disfluency("<<talking to child>>") == "[talking_to_child]");
  CHECK(strip_disfluency("# Right. #") == "Right.");
  CHECK(strip_disfluency("uh-huh") == "uh-huh");
}

TEST_CASE("swda: fixture file") {
  auto s = parse_swda(kFixtures + "/swda");
  CHECK(s.files == 1);
  REQUIRE(s.utterances.size() == 20);
  CHECK(s.skipped_rows == 2);
  CHECK(s.utterances[0].act_tag == "sd");
  CHECK(s.utterances[0].tokens == Tokens{"me", ",", "i'm", "in", "the", "legal", "department", "."});
  CHECK(s.utterances[9].act_tag == "x");
  CHECK(s.utterances[9].tokens == Tokens{"[laughter]"});
  for (std::size_t i = 0; i < s.utterances.size(); ++i) {
    CHECK(s.utterances[i].turn == i);
    CHECK(s.utterances[i].conversation == "4325");
  }
  CHECK_THROWS_AS(parse_swda("/nonexistent/swda"), IoError);
}

TEST_CASE("swda: configurable columns and fallback conversation id") {
  std::istringstream in("tag,utt\nqy,Is it?\nb,Uh-huh.\n");
  SwdaOptions opt;
  opt.act_column = "tag";
  opt.text_column = "utt";
  auto s = parse_swda_csv(in, "conv7", opt);
  REQUIRE(s.utterances.size() == 2);
  CHECK(s.utterances[1].conversation == "conv7");
  CHECK(s.utterances[1].act_tag == "b");

  std::istringstream missing("tag,utt\nqy,Is it?\n");
  CHECK_THROWS_AS(parse_swda_csv(missing, "conv7"), InputError);
}

TEST_CASE("tag condensation") {
  auto m = TagMapping::defaults();
  CHECK(m.condense("b") == DialogueAct::Backchannel);
  CHECK(m.condense("zz-unknown") == DialogueAct::Other);
  CHECK(m.condense("aa") == DialogueAct::Accept);
  CHECK(m.condense("sd") == DialogueAct::NonOpinionated);
  CHECK(m.condense("sv") == DialogueAct::Opinionated);
  CHECK(m.condense("qy") == DialogueAct::Question);
  CHECK(m.condense("qw") == DialogueAct::Question);
  CHECK(m.condense("bf") == DialogueAct::Summarize);
  CHECK(m.condense("^h") == DialogueAct::Summarize);
  CHECK(m.condense("ar") == DialogueAct::Reject);
  CHECK(m.condense("nn") == DialogueAct::Reject);
  CHECK(m.condense("fc") == DialogueAct::Conventional);
  CHECK(m.condense("fp") == DialogueAct::Conventional);
  CHECK(m.condense("ft") == DialogueAct::Conventional);
  CHECK(m.condense("x") == DialogueAct::NonVerbal);
  CHECK(m.condense("sd^r") == DialogueAct::NonOpinionated);
  CHECK(m.condense("qy^d^t") == DialogueAct::Question);
  CHECK(m.condense("") == DialogueAct::Other);
}

TEST_CASE("tag condensation is total") {
  auto m = TagMapping::defaults();
  Rng rng(3);
  const std::string alphabet = "abdfghnqrsvwxyz^_%+@ ";
  for (int i = 0; i < 2000; ++i) {
    std::string tag;
    const auto n = rng.index(8);
    for (std::size_t k = 0; k < n; ++k) tag += alphabet[rng.index(alphabet.size())];
    CHECK(act_index(m.condense(tag)) < kNumDialogueActs);
  }
}

TEST_CASE("tag mapping file") {
  auto shipped = TagMapping::load(std::string(CSS_SOURCE_DIR) + "/data/swda_tag_map.tsv");
  CHECK(shipped.entries() == TagMapping::defaults().entries());

  std::istringstream bad("# comment\nzz\tNotAClass\n");
  CHECK_THROWS_AS(TagMapping::parse(bad, "bad.tsv"), ConfigError);
  std::istringstream notab("zz Accept\n");
  CHECK_THROWS_AS(TagMapping::parse(notab, "notab.tsv"), ConfigError);
  CHECK_THROWS_AS(TagMapping::load("/nonexistent/map.tsv"), IoError);

  std::istringstream custom("\n# override\nb\tAccept\n");
  auto m = TagMapping::parse(custom, "custom.tsv");
  CHECK(m.condense("b") == DialogueAct::Accept);
  CHECK(m.condense("sd") == DialogueAct::Other);
}

TEST_CASE("bucketing: assignment and drops") {
  std::vector<DialoguePair> pairs{make_pair(7, 9), make_pair(30, 60), make_pair(12, 3), make_pair(0, 0)};
  std::vector<std::size_t> bounds{10, 25, 50};
  auto plan = bucket_batches(pairs, bounds, 8, 1);
  CHECK(plan.dropped == 1);
  std::map<std::size_t, std::size_t> bucket_of;
  for (const auto& b : plan.batches) {
    for (auto src : b.source) bucket_of[src] = b.bucket;
  }
  CHECK(bucket_of.at(0) == 10);
  CHECK(bucket_of.count(1) == 0);
  CHECK(bucket_of.at(2) == 25);
  CHECK(bucket_of.at(3) == 10);

  std::vector<std::size_t> unsorted{25, 10};
  CHECK_THROWS(bucket_batches(pairs, unsorted, 8, 1));
}

TEST_CASE("bucketing: batch layout") {
  std::vector<DialoguePair> pairs{make_pair(3, 2)};
  std::vector<std::size_t> row{0};
  auto b = make_batch(pairs, row, 5);
  CHECK(b.utterances.cols == 5);
  CHECK(b.responses.cols == 6);
  CHECK(std::vector<int>(b.utterances.row(0).begin(), b.utterances.row(0).end()) == std::vector<int>{4, 5, 6, 0, 0});
  CHECK(std::vector<int>(b.responses.row(0).begin(), b.responses.row(0).end()) ==
        std::vector<int>{kSosId, 4, 5, kEosId, 0, 0});
  CHECK(b.utterance_lengths[0] == 3);
  CHECK(b.response_lengths[0] == 2);
}

TEST_CASE("property: bucketing rows, coverage and determinism") {
  Rng rng(99);
  std::vector<std::size_t> bounds{10, 15, 25, 50};
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<DialoguePair> pairs;
    const auto n = 1 + rng.index(120);
    std::size_t expected_drops = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto u = 1 + rng.index(60);
      const auto r = rng.index(60);
      if (std::max(u, r + 1) > 50) ++expected_drops;
      pairs.push_back(make_pair(u, r, 4 + static_cast<int>(rng.index(20))));
    }
    const auto seed = rng.next();
    const auto batch_size = 1 + rng.index(16);
    auto plan = bucket_batches(pairs, bounds, batch_size, seed);
    CHECK(plan.dropped == expected_drops);

    std::set<std::size_t> seen;
    for (const auto& b : plan.batches) {
      CHECK(b.size() <= batch_size);
      for (std::size_t r = 0; r < b.size(); ++r) {
        CHECK(seen.insert(b.source[r]).second);
        const auto ul = static_cast<std::size_t>(b.utterance_lengths[r]);
        const auto rl = static_cast<std::size_t>(b.response_lengths[r]);
        CHECK(ul <= b.bucket);
        CHECK(rl + 1 <= b.bucket);
        // smallest bound that fits
        auto it = std::lower_bound(bounds.begin(), bounds.end(), std::max(ul, rl + 1));
        CHECK(*it == b.bucket);
        auto urow = b.utterances.row(r);
        auto rrow = b.responses.row(r);
        CHECK(std::none_of(urow.begin(), urow.begin() + static_cast<std::ptrdiff_t>(ul), [](int id) { return id == kPadId; }));
        CHECK(std::all_of(urow.begin() + static_cast<std::ptrdiff_t>(ul), urow.end(), [](int id) { return id == kPadId; }));
        CHECK(rrow[0] == kSosId);
        CHECK(rrow[rl + 1] == kEosId);
        CHECK(std::all_of(rrow.begin() + static_cast<std::ptrdiff_t>(rl + 2), rrow.end(), [](int id) { return id == kPadId; }));
      }
    }
    CHECK(seen.size() + plan.dropped == n);

    auto again = bucket_batches(pairs, bounds, batch_size, seed);
    REQUIRE(again.batches.size() == plan.batches.size());
    for (std::size_t i = 0; i < again.batches.size(); ++i) {
      CHECK(again.batches[i].source == plan.batches[i].source);
      CHECK(again.batches[i].utterances.ids == plan.batches[i].utterances.ids);
      CHECK(again.batches[i].responses.ids == plan.batches[i].responses.ids);
    }
  }
}
