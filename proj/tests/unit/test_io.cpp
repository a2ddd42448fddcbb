#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "msdiar/embeddings.hpp"
#include "msdiar/rttm.hpp"
#include "oracles.hpp"

using namespace msdiar;

TEST(Rttm, ParsesSingleLine) {
  auto turns = parse_rttm("SPEAKER sess1 1 12.340 2.170 <NA> <NA> spkA <NA> <NA>\n");
  ASSERT_EQ(turns.size(), 1u);
  EXPECT_EQ(turns[0].recording_id, "sess1");
  EXPECT_EQ(turns[0].onset, 12340);
  EXPECT_EQ(turns[0].duration, 2170);
  EXPECT_EQ(turns[0].speaker_id, "spkA");
}

TEST(Rttm, EmptyInputGivesNoTurns) {
  EXPECT_TRUE(parse_rttm("").empty());
  EXPECT_TRUE(parse_rttm("\n;; comment\n   \n").empty());
}

TEST(Rttm, OverlappingTurnsAreKept) {
  auto turns = parse_rttm(
      "SPEAKER r 1 0.0 2.0 <NA> <NA> a <NA> <NA>\n"
      "SPEAKER r 1 1.0 2.0 <NA> <NA> b <NA> <NA>\n");
  EXPECT_EQ(turns.size(), 2u);
}

TEST(Rttm, TooFewFieldsReportsLine) {
  try {
    parse_rttm("SPEAKER r 1 0.0 2.0 <NA> <NA> a <NA> <NA>\nSPEAKER r 1 0.0\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Rttm, RejectsBadValues) {
  EXPECT_THROW(parse_rttm("SPEAKER r 1 1.0 0.0 <NA> <NA> a <NA> <NA>\n"), ValidationError);
  EXPECT_THROW(parse_rttm("SPEAKER r 1 1.0 -1 <NA> <NA> a <NA> <NA>\n"), ValidationError);
  EXPECT_THROW(parse_rttm("SPEAKER r 1 -1.0 1 <NA> <NA> a <NA> <NA>\n"), ValidationError);
  EXPECT_THROW(parse_rttm("SPEAKER r 1 abc 1 <NA> <NA> a <NA> <NA>\n"), ParseError);
  EXPECT_THROW(parse_rttm("LEXEME r 1 0 1 <NA> <NA> a <NA> <NA>\n"), ParseError);
}

TEST(Rttm, SortedByRecordingThenOnset) {
  auto turns = parse_rttm(
      "SPEAKER b 1 0.5 1 <NA> <NA> x <NA> <NA>\n"
      "SPEAKER a 1 3.0 1 <NA> <NA> x <NA> <NA>\n"
      "SPEAKER a 1 1.0 1 <NA> <NA> y <NA> <NA>\n");
  ASSERT_EQ(turns.size(), 3u);
  EXPECT_EQ(turns[0].recording_id, "a");
  EXPECT_EQ(turns[0].onset, 1000);
  EXPECT_EQ(turns[1].onset, 3000);
  EXPECT_EQ(turns[2].recording_id, "b");
}

TEST(Rttm, RoundTripRandom) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<RttmTurn> turns;
    Millis t = 0;
    for (int k = 0; k < 20; ++k) {
      t += std::uniform_int_distribution<Millis>(0, 2000)(rng);
      const Millis d = std::uniform_int_distribution<Millis>(1, 3000)(rng);
      turns.push_back({"rec", t, d, "s" + std::to_string(k % 3)});
    }
    auto back = parse_rttm(emit_rttm(turns));
    EXPECT_EQ(back, turns);
  }
}

TEST(OracleSad, MergesOverlapAndTouching) {
  std::vector<RttmTurn> turns{{"r", 0, 1000, "a"}, {"r", 500, 1000, "b"}, {"r", 1500, 500, "a"}, {"r", 3000, 100, "b"}};
  auto sad = oracle_sad(turns);
  ASSERT_EQ(sad.size(), 2u);
  EXPECT_EQ(sad[0].start, 0);
  EXPECT_EQ(sad[0].end, 2000);
  EXPECT_EQ(sad[1].start, 3000);
}

TEST(OracleSad, MatchesGridUnion) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<RttmTurn> turns;
    Millis sum = 0;
    for (int k = 0; k < 15; ++k) {
      const Millis on = std::uniform_int_distribution<Millis>(0, 20000)(rng);
      const Millis d = std::uniform_int_distribution<Millis>(1, 2000)(rng);
      turns.push_back({"r", on, d, "s" + std::to_string(k % 4)});
      sum += d;
    }
    auto sad = oracle_sad(turns);
    auto grid = oracle::speech_grid(turns, 23000);
    std::vector<bool> mine(grid.size(), false);
    for (const auto& iv : sad)
      for (Millis m = iv.start; m < iv.end; ++m) mine[static_cast<std::size_t>(m)] = true;
    EXPECT_EQ(mine, grid);
    for (std::size_t i = 1; i < sad.size(); ++i) EXPECT_LT(sad[i - 1].end, sad[i].start);
    EXPECT_LE(total_length(sad), sum);
  }
}

TEST(OracleSad, TotalEqualsSumIffDisjoint) {
  std::vector<RttmTurn> disjoint{{"r", 0, 1000, "a"}, {"r", 2000, 500, "b"}};
  EXPECT_EQ(total_length(oracle_sad(disjoint)), 1500);
  std::vector<RttmTurn> ov{{"r", 0, 1000, "a"}, {"r", 900, 500, "b"}};
  EXPECT_LT(total_length(oracle_sad(ov)), 1500);
}

TEST(Embeddings, RoundTripIsBitExact) {
  std::mt19937_64 rng(9);
  std::normal_distribution<float> g(0.f, 1.f);
  EmbeddingMatrix m;
  m.scale_id = 2;
  m.rows.resize(7, 5);
  for (Eigen::Index i = 0; i < m.rows.size(); ++i) m.rows.data()[i] = g(rng);
  std::istringstream in(format_embeddings(m));
  auto back = parse_embeddings(in);
  EXPECT_EQ(back.scale_id, 2);
  ASSERT_EQ(back.size(), 7);
  ASSERT_EQ(back.dim(), 5);
  for (Eigen::Index i = 0; i < m.rows.size(); ++i) EXPECT_EQ(back.rows.data()[i], m.rows.data()[i]);
}

TEST(Embeddings, RejectsMalformedArchives) {
  auto parse = [](const std::string& s) {
    std::istringstream in(s);
    return parse_embeddings(in);
  };
  EXPECT_THROW(parse(""), FormatError);
  EXPECT_THROW(parse("2 2\n"), ParseError);
  EXPECT_THROW(parse("2 2 0\n1 2\n"), FormatError);
  EXPECT_THROW(parse("2 1 0\n1 2 3\n"), FormatError);
  EXPECT_THROW(parse("2 1 0\n1 nan\n"), FormatError);
  EXPECT_THROW(parse("2 1 0\n1 inf\n"), FormatError);
  EXPECT_THROW(parse("2 1 0\n1 2\n3 4\n"), FormatError);
  EXPECT_NO_THROW(parse("2 1 0\n1 2\n"));
}
