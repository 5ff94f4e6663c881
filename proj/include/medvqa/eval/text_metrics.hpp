#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace medvqa::eval {

// Shared tokenizer: lowercase, every ASCII punctuation character becomes its
// own token, whitespace separates the rest.
std::vector<std::string> tokenize(std::string_view text);

struct PRF {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Corpus BLEU: clipped n-gram precisions pooled over the corpus, geometric
// mean with add-one smoothing for orders that have no match
// ((0 + 1) / (total + 1)), brevity penalty exp(1 - r/c) when c < r.
// Error(Contract) on unequal lengths or an empty corpus.
double bleu(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references, int max_n = 4);

// Orders where neither side has an n-gram score 1 if the token sequences are
// equal and 0 otherwise.
PRF rouge_n(std::string_view hyp, std::string_view ref, int n);
PRF rouge_l(std::string_view hyp, std::string_view ref);

// Exact-match METEOR: F_mean = 10PR/(R + 9P), penalty 0.5 (chunks/m)^3.
double meteor_simple(std::string_view hyp, std::string_view ref);

// chrF++ on a 0-100 scale: character n-grams (whitespace removed) of order
// 1..n_char and word n-grams of order 1..n_word, F_beta per order averaged
// uniformly; orders empty on both sides are skipped.
double chrf_pp(std::string_view hyp, std::string_view ref, int n_char = 6, int n_word = 2, double beta = 2.0);

// Sufficient statistics of one hypothesis/reference pair. Pooled statistics
// give corpus BLEU and chrF++; ROUGE and METEOR are averaged per sentence.
struct SentenceStats {
    static constexpr int kMaxBleu = 4;
    static constexpr int kChrfOrders = 8;  // 6 character + 2 word orders

    std::array<double, kMaxBleu> bleu_match{};
    std::array<double, kMaxBleu> bleu_total{};
    double hyp_len = 0.0;
    double ref_len = 0.0;
    std::array<double, kChrfOrders> chrf_match{};
    std::array<double, kChrfOrders> chrf_hyp{};
    std::array<double, kChrfOrders> chrf_ref{};
    double rouge1 = 0.0;
    double rouge2 = 0.0;
    double rougeL = 0.0;
    double meteor = 0.0;
};

SentenceStats sentence_stats(std::string_view hyp, std::string_view ref);

struct CorpusScores {
    double bleu = 0.0;
    double rouge1 = 0.0;
    double rouge2 = 0.0;
    double rougeL = 0.0;
    double meteor = 0.0;
    double chrf_pp = 0.0;
    std::size_t count = 0;
};

// Pooled reduction of per-sentence statistics (fixed order, so the result
// does not depend on how the statistics were computed).
CorpusScores reduce_stats(const std::vector<SentenceStats>& stats);

// Per-sentence statistics computed with OpenMP, then reduce_stats.
CorpusScores corpus_scores(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references);

}  // namespace medvqa::eval
