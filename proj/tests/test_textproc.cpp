#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "fuzz_text.hpp"
#include "ursa/corpus.hpp"
#include "ursa/textproc.hpp"

using namespace ursa;

namespace {

StopwordSet shipped_stopwords() { return load_stopwords(URSA_DEFAULT_STOPWORDS); }

}  // namespace

TEST(Normalize, StripsUrlLatinDigitsPunctuation) {
  EXPECT_EQ(normalize("یہ فلم اچھی ہے http://x.com abc 123!"), "یہ فلم اچھی ہے");
}

TEST(Normalize, EmptyAndCleanInputs) {
  EXPECT_EQ(normalize(""), "");
  EXPECT_EQ(normalize("فلم"), "فلم");
  EXPECT_EQ(normalize("   \t\n "), "");
}

TEST(Normalize, UrduPunctuationAndDigits) {
  EXPECT_EQ(normalize("اچھی۔فلم"), "اچھی فلم");
  EXPECT_EQ(normalize("فلم، کہانی؛ کیا؟ ٪ ۱۲۳ ٤٥"), "فلم کہانی کیا");
}

TEST(Normalize, UrlForms) {
  EXPECT_EQ(normalize("دیکھیں https://a.b/c?d=1 ابھی"), "دیکھیں ابھی");
  EXPECT_EQ(normalize("دیکھیں WWW.films.pk"), "دیکھیں");
  EXPECT_EQ(normalize("ftp://files فلم"), "فلم");
  // Without a scheme or www. prefix only the Latin letters go.
  EXPECT_EQ(normalize("example.comفلم"), "فلم");
}

TEST(Normalize, WhitespaceRunsCollapse) {
  EXPECT_EQ(normalize("  فلم    اچھی\r\nہے  "), "فلم اچھی ہے");
}

TEST(Normalize, ComposesCanonically) {
  // Alef + madda above composes to U+0622.
  EXPECT_EQ(normalize("\u0627\u0653\u067E"), "\u0622\u067E");
}

TEST(Normalize, DiacriticsKeptUnlessRequested) {
  const std::string s = "دِل";
  EXPECT_EQ(normalize(s), s);
  NormalizeOptions strip;
  strip.strip_diacritics = true;
  EXPECT_EQ(normalize(s, strip), "دل");
}

TEST(Normalize, JoinersStayInsideWordsOnly) {
  EXPECT_EQ(normalize("بے‌کار"), "بے‌کار");
  EXPECT_EQ(normalize("‌بےکار‌ فلم"), "بےکار فلم");
  EXPECT_EQ(normalize("‌ ‍"), "");
}

TEST(Normalize, FormatCharactersRemoved) {
  EXPECT_EQ(normalize("﻿فلم‎ اچھی­"), "فلم اچھی");
}

TEST(Normalize, InvalidUtf8Throws) {
  EXPECT_THROW(normalize("\xFF"), EncodingError);
  EXPECT_THROW(normalize("\xC3"), EncodingError);
  EXPECT_THROW(normalize("\xC0\x80"), EncodingError);        // overlong
  EXPECT_THROW(normalize("\xED\xA0\x80"), EncodingError);    // surrogate
  EXPECT_THROW(normalize("\xF4\x90\x80\x80"), EncodingError);  // > U+10FFFF
}

TEST(Normalize, IdempotentAndCleanOnFuzz) {
  Rng rng(2024);
  for (int i = 0; i < 10000; ++i) {
    const std::string in = test::fuzz_string(rng);
    for (bool strip : {false, true}) {
      NormalizeOptions o;
      o.strip_diacritics = strip;
      const std::string once = normalize(in, o);
      EXPECT_EQ(normalize(once, o), once) << "input #" << i;
      EXPECT_EQ(test::check_clean(once), "") << "input #" << i;
    }
  }
}

TEST(Utf8, RoundTrip) {
  const std::u32string cps = U"a\u00E9\u0628\u200C\U0001F600";
  EXPECT_EQ(decode_utf8(encode_utf8(cps)), cps);
}

TEST(Tokenize, Examples) {
  EXPECT_EQ(tokenize("یہ فلم اچھی"), (std::vector<std::string>{"یہ", "فلم", "اچھی"}));
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_EQ(tokenize("فلم  اچھی"), (std::vector<std::string>{"فلم", "اچھی"}));
  EXPECT_EQ(tokenize("بے‌کار"), (std::vector<std::string>{"بے‌کار"}));
}

TEST(Stopwords, ShippedListContents) {
  const StopwordSet stop = shipped_stopwords();
  EXPECT_TRUE(stop.contains("یہ"));
  EXPECT_TRUE(stop.contains("ہے"));
  EXPECT_FALSE(stop.contains("نہیں"));
  EXPECT_FALSE(stop.contains("نہ"));
  EXPECT_GE(stop.size(), 50u);
}

TEST(Stopwords, RemoveExamples) {
  const StopwordSet stop = shipped_stopwords();
  EXPECT_EQ(remove_stopwords({"یہ", "فلم", "اچھی", "ہے"}, stop), (std::vector<std::string>{"فلم", "اچھی"}));
  EXPECT_TRUE(remove_stopwords({}, stop).empty());
  const std::vector<std::string> t{"یہ", "فلم"};
  EXPECT_EQ(remove_stopwords(t, {}), t);
}

TEST(Stopwords, ParseSkipsCommentsAndBlanks) {
  std::istringstream in("# comment\n\nیہ\n  # indented comment\r\nہے\r\n");
  const StopwordSet s = parse_stopwords(in);
  EXPECT_EQ(s, (StopwordSet{"یہ", "ہے"}));
}

TEST(Stopwords, MissingFileThrows) { EXPECT_THROW(load_stopwords("/nonexistent/stop.txt"), std::runtime_error); }

TEST(Vocabulary, MinFreqThreshold) {
  const Vocabulary v = build_vocab({{"a", "a", "b"}, {"a"}}, 2);
  EXPECT_EQ(v.size(), 3u);
  EXPECT_EQ(v.id("<pad>"), Vocabulary::pad);
  EXPECT_EQ(v.token(0), "<pad>");
  EXPECT_EQ(v.token(1), "<unk>");
  EXPECT_EQ(v.id("a"), 2u);
  EXPECT_EQ(v.id("b"), Vocabulary::unk);
}

TEST(Vocabulary, EverythingAdmittedAtMinFreqOne) {
  EXPECT_EQ(build_vocab({{"x", "y"}}, 1).size(), 4u);
}

TEST(Vocabulary, TiesBrokenByCodepointOrder) {
  const Vocabulary v = build_vocab({{"ب", "ا", "ب", "ا", "پ", "پ", "پ"}}, 1);
  EXPECT_EQ(v.id("پ"), 2u);  // most frequent
  EXPECT_EQ(v.id("ا"), 3u);  // U+0627 < U+0628
  EXPECT_EQ(v.id("ب"), 4u);
}

TEST(Vocabulary, EmptyCorpusThrows) { EXPECT_THROW(build_vocab({}, 1), std::invalid_argument); }

TEST(Vocabulary, PermutationInvariant) {
  Rng rng(9);
  std::vector<std::vector<std::string>> corpus;
  for (int d = 0; d < 30; ++d) {
    std::vector<std::string> doc;
    for (int t = 0; t < 10; ++t) doc.push_back(synth_filler(rng.below(25)));
    corpus.push_back(doc);
  }
  const Vocabulary ref = build_vocab(corpus, 1);
  for (int trial = 0; trial < 10; ++trial) {
    rng.shuffle(corpus);
    EXPECT_EQ(build_vocab(corpus, 1), ref);
  }
}

TEST(Vocabulary, SaveLoadRoundTrip) {
  const Vocabulary v = build_vocab({{"فلم", "اچھی", "فلم"}, {"بری"}}, 1);
  std::stringstream ss;
  v.save(ss);
  EXPECT_EQ(Vocabulary::load(ss), v);
}

TEST(Encode, PaddingAndTruncation) {
  const Vocabulary v = build_vocab({{"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"}}, 1);
  const TokenizedDoc five = encode({"a", "b", "c", "d", "e"}, v, 8, 1);
  EXPECT_EQ(five.ids.size(), 8u);
  EXPECT_EQ(five.true_len, 5u);
  EXPECT_EQ(five.label, 1);
  for (std::size_t i = 5; i < 8; ++i) EXPECT_EQ(five.ids[i], Vocabulary::pad);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_GE(five.ids[i], 2u);

  const TokenizedDoc ten = encode({"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"}, v, 8);
  EXPECT_EQ(ten.ids.size(), 8u);
  EXPECT_EQ(ten.true_len, 8u);
  EXPECT_EQ(decode(ten, v), (std::vector<std::string>{"a", "b", "c", "d", "e", "f", "g", "h"}));
}

TEST(Encode, UnknownTokenMapsToUnk) {
  const Vocabulary v = build_vocab({{"a"}}, 1);
  EXPECT_EQ(encode({"zzz"}, v, 4).ids[0], Vocabulary::unk);
}

TEST(Encode, EmptyDocumentRejected) {
  const Vocabulary v = build_vocab({{"a"}}, 1);
  EXPECT_THROW(encode({}, v, 4), EmptyDocumentError);
  EXPECT_THROW(encode({"a"}, v, 0), std::invalid_argument);
}

TEST(Encode, DecodeRoundTripsInVocabTokens) {
  Rng rng(4);
  std::vector<std::vector<std::string>> corpus;
  for (int d = 0; d < 20; ++d) {
    std::vector<std::string> doc;
    const std::size_t n = 1 + rng.below(12);
    for (std::size_t t = 0; t < n; ++t) doc.push_back(synth_filler(rng.below(40)));
    corpus.push_back(doc);
  }
  const Vocabulary v = build_vocab(corpus, 1);
  for (const auto& doc : corpus) EXPECT_EQ(decode(encode(doc, v, 12), v), doc);
}

TEST(Pipeline, VocabularyTokensAreClean) {
  const Dataset ds = load_csv(std::string(URSA_FIXTURES) + "/urdu_sample.csv", "text", "label", default_label_map());
  const TextPipeline pipe{{}, shipped_stopwords()};
  std::vector<std::vector<std::string>> corpus;
  for (const auto& d : ds.documents) corpus.push_back(pipe(d.text));
  const Vocabulary v = build_vocab(corpus, 1);
  for (std::size_t i = 2; i < v.size(); ++i) {
    EXPECT_EQ(test::check_clean(v.token(static_cast<TokenId>(i))), "");
    EXPECT_EQ(v.token(static_cast<TokenId>(i)).find(' '), std::string::npos);
  }
}

TEST(Pipeline, GoldenFixtureTokens) {
  const Dataset ds = load_csv(std::string(URSA_FIXTURES) + "/urdu_sample.csv", "text", "label", default_label_map());
  std::ifstream golden(std::string(URSA_FIXTURES) + "/urdu_sample.tokens");
  ASSERT_TRUE(golden);
  const TextPipeline pipe{{}, shipped_stopwords()};
  std::string line;
  std::size_t i = 0;
  for (; std::getline(golden, line); ++i) {
    ASSERT_LT(i, ds.size());
    EXPECT_EQ(pipe(ds.documents[i].text), tokenize(line)) << "document " << i + 1;
  }
  EXPECT_EQ(i, ds.size());
  EXPECT_EQ(ds.size(), 10u);
}
