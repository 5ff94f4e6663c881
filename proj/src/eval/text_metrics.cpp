#include "medvqa/eval/text_metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_map>

#include "medvqa/error.hpp"
#include "medvqa/parallel.hpp"

namespace medvqa::eval {
namespace {

using Counts = std::unordered_map<std::string, double>;

Counts word_ngrams(const std::vector<std::string>& toks, int n) {
    Counts out;
    if (n <= 0 || toks.size() < static_cast<std::size_t>(n)) return out;
    for (std::size_t i = 0; i + n <= toks.size(); ++i) {
        std::string key = toks[i];
        for (int k = 1; k < n; ++k) {
            key += '\x1f';
            key += toks[i + k];
        }
        out[key] += 1.0;
    }
    return out;
}

Counts char_ngrams(const std::string& chars, int n) {
    Counts out;
    if (n <= 0 || chars.size() < static_cast<std::size_t>(n)) return out;
    for (std::size_t i = 0; i + n <= chars.size(); ++i) out[chars.substr(i, n)] += 1.0;
    return out;
}

double total(const Counts& c) {
    double t = 0.0;
    for (const auto& [k, v] : c) t += v;
    return t;
}

double clipped_overlap(const Counts& hyp, const Counts& ref) {
    double m = 0.0;
    for (const auto& [k, v] : hyp) {
        auto it = ref.find(k);
        if (it != ref.end()) m += std::min(v, it->second);
    }
    return m;
}

PRF make_prf(double match, double hyp_total, double ref_total, bool tokens_equal) {
    if (hyp_total == 0.0 && ref_total == 0.0) {
        const double v = tokens_equal ? 1.0 : 0.0;
        return {v, v, v};
    }
    PRF r;
    r.precision = hyp_total > 0.0 ? match / hyp_total : 0.0;
    r.recall = ref_total > 0.0 ? match / ref_total : 0.0;
    r.f1 = (r.precision + r.recall) > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    return r;
}

PRF rouge_n_tokens(const std::vector<std::string>& h, const std::vector<std::string>& r, int n) {
    const Counts hc = word_ngrams(h, n);
    const Counts rc = word_ngrams(r, n);
    return make_prf(clipped_overlap(hc, rc), total(hc), total(rc), h == r);
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

PRF rouge_l_tokens(const std::vector<std::string>& h, const std::vector<std::string>& r) {
    const double l = static_cast<double>(lcs_length(h, r));
    return make_prf(l, static_cast<double>(h.size()), static_cast<double>(r.size()), h == r);
}

double meteor_tokens(const std::vector<std::string>& h, const std::vector<std::string>& r) {
    if (h.empty() || r.empty()) return 0.0;
    std::vector<bool> used(r.size(), false);
    std::vector<long> align(h.size(), -1);
    long prev = -1;  // ref position of the previous hyp token, -1 if unmatched
    for (std::size_t i = 0; i < h.size(); ++i) {
        long pick = -1;
        if (prev >= 0 && prev + 1 < static_cast<long>(r.size()) && !used[prev + 1] && r[prev + 1] == h[i])
            pick = prev + 1;
        for (std::size_t j = 0; pick < 0 && j < r.size(); ++j)
            if (!used[j] && r[j] == h[i]) pick = static_cast<long>(j);
        if (pick >= 0) {
            used[pick] = true;
            align[i] = pick;
            prev = pick;
        } else {
            prev = -1;
        }
    }
    double m = 0.0, chunks = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        if (align[i] < 0) continue;
        m += 1.0;
        const bool continues = i > 0 && align[i - 1] >= 0 && align[i - 1] + 1 == align[i];
        if (!continues) chunks += 1.0;
    }
    if (m == 0.0) return 0.0;
    const double p = m / static_cast<double>(h.size());
    const double rc = m / static_cast<double>(r.size());
    const double fmean = 10.0 * p * rc / (rc + 9.0 * p);
    const double frag = chunks / m;
    return fmean * (1.0 - 0.5 * frag * frag * frag);
}

std::string joined_chars(const std::vector<std::string>& toks) {
    std::string s;
    for (const auto& t : toks) s += t;
    return s;
}

struct OrderStats {
    double match = 0.0, hyp = 0.0, ref = 0.0;
};

void chrf_orders(const std::vector<std::string>& h, const std::vector<std::string>& r, int n_char, int n_word,
                 std::vector<OrderStats>& out) {
    const std::string hc = joined_chars(h), rc = joined_chars(r);
    out.clear();
    for (int n = 1; n <= n_char; ++n) {
        const Counts a = char_ngrams(hc, n), b = char_ngrams(rc, n);
        out.push_back({clipped_overlap(a, b), total(a), total(b)});
    }
    for (int n = 1; n <= n_word; ++n) {
        const Counts a = word_ngrams(h, n), b = word_ngrams(r, n);
        out.push_back({clipped_overlap(a, b), total(a), total(b)});
    }
}

double chrf_from_orders(const std::vector<OrderStats>& orders, double beta) {
    const double b2 = beta * beta;
    double sum = 0.0;
    int used = 0;
    for (const auto& o : orders) {
        if (o.hyp == 0.0 && o.ref == 0.0) continue;
        ++used;
        if (o.match == 0.0) continue;
        const double p = o.match / o.hyp, r = o.match / o.ref;
        sum += (1.0 + b2) * p * r / (b2 * p + r);
    }
    if (used == 0) return 100.0;
    return 100.0 * sum / used;
}

void check_corpus(const std::vector<std::string>& h, const std::vector<std::string>& r) {
    if (h.size() != r.size())
        fail(ErrorKind::Contract, "hypothesis/reference count mismatch: " + std::to_string(h.size()) + " vs " +
                                      std::to_string(r.size()));
    if (h.empty()) fail(ErrorKind::Contract, "empty corpus");
}

double bleu_from_pooled(const double* match, const double* tot, int max_n, double c, double r) {
    if (c == 0.0) return 0.0;
    double log_sum = 0.0;
    for (int n = 0; n < max_n; ++n) {
        const double p = match[n] > 0.0 ? match[n] / tot[n] : 1.0 / (tot[n] + 1.0);
        log_sum += std::log(p);
    }
    const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
    return bp * std::exp(log_sum / max_n);
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) out.push_back(std::move(cur));
        cur.clear();
    };
    for (const char ch : text) {
        const auto u = static_cast<unsigned char>(ch);
        if (std::isspace(u)) {
            flush();
        } else if (u < 0x80 && std::ispunct(u)) {
            flush();
            out.emplace_back(1, ch);
        } else {
            cur += static_cast<char>(std::tolower(u));
        }
    }
    flush();
    return out;
}

double bleu(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references, int max_n) {
    check_corpus(hypotheses, references);
    if (max_n < 1) fail(ErrorKind::Contract, "bleu max_n must be >= 1");
    std::vector<double> match(max_n, 0.0), tot(max_n, 0.0);
    double c = 0.0, r = 0.0;
    for (std::size_t i = 0; i < hypotheses.size(); ++i) {
        const auto h = tokenize(hypotheses[i]);
        const auto rf = tokenize(references[i]);
        c += static_cast<double>(h.size());
        r += static_cast<double>(rf.size());
        for (int n = 1; n <= max_n; ++n) {
            const Counts hc = word_ngrams(h, n), rc = word_ngrams(rf, n);
            match[n - 1] += clipped_overlap(hc, rc);
            tot[n - 1] += total(hc);
        }
    }
    return bleu_from_pooled(match.data(), tot.data(), max_n, c, r);
}

PRF rouge_n(std::string_view hyp, std::string_view ref, int n) {
    if (n < 1) fail(ErrorKind::Contract, "rouge n must be >= 1");
    return rouge_n_tokens(tokenize(hyp), tokenize(ref), n);
}

PRF rouge_l(std::string_view hyp, std::string_view ref) { return rouge_l_tokens(tokenize(hyp), tokenize(ref)); }

double meteor_simple(std::string_view hyp, std::string_view ref) { return meteor_tokens(tokenize(hyp), tokenize(ref)); }

double chrf_pp(std::string_view hyp, std::string_view ref, int n_char, int n_word, double beta) {
    if (n_char < 0 || n_word < 0 || beta <= 0.0) fail(ErrorKind::Contract, "invalid chrF++ parameters");
    std::vector<OrderStats> orders;
    chrf_orders(tokenize(hyp), tokenize(ref), n_char, n_word, orders);
    return chrf_from_orders(orders, beta);
}

SentenceStats sentence_stats(std::string_view hyp, std::string_view ref) {
    const auto h = tokenize(hyp);
    const auto r = tokenize(ref);
    SentenceStats s;
    s.hyp_len = static_cast<double>(h.size());
    s.ref_len = static_cast<double>(r.size());
    for (int n = 1; n <= SentenceStats::kMaxBleu; ++n) {
        const Counts hc = word_ngrams(h, n), rc = word_ngrams(r, n);
        s.bleu_match[n - 1] = clipped_overlap(hc, rc);
        s.bleu_total[n - 1] = total(hc);
    }
    std::vector<OrderStats> orders;
    chrf_orders(h, r, 6, 2, orders);
    for (int k = 0; k < SentenceStats::kChrfOrders; ++k) {
        s.chrf_match[k] = orders[k].match;
        s.chrf_hyp[k] = orders[k].hyp;
        s.chrf_ref[k] = orders[k].ref;
    }
    s.rouge1 = rouge_n_tokens(h, r, 1).f1;
    s.rouge2 = rouge_n_tokens(h, r, 2).f1;
    s.rougeL = rouge_l_tokens(h, r).f1;
    s.meteor = meteor_tokens(h, r);
    return s;
}

CorpusScores reduce_stats(const std::vector<SentenceStats>& stats) {
    if (stats.empty()) fail(ErrorKind::Contract, "empty corpus");
    std::array<double, SentenceStats::kMaxBleu> match{}, tot{};
    std::vector<OrderStats> orders(SentenceStats::kChrfOrders);
    double c = 0.0, r = 0.0;
    CorpusScores out;
    for (const auto& s : stats) {
        for (int n = 0; n < SentenceStats::kMaxBleu; ++n) {
            match[n] += s.bleu_match[n];
            tot[n] += s.bleu_total[n];
        }
        for (int k = 0; k < SentenceStats::kChrfOrders; ++k) {
            orders[k].match += s.chrf_match[k];
            orders[k].hyp += s.chrf_hyp[k];
            orders[k].ref += s.chrf_ref[k];
        }
        c += s.hyp_len;
        r += s.ref_len;
        out.rouge1 += s.rouge1;
        out.rouge2 += s.rouge2;
        out.rougeL += s.rougeL;
        out.meteor += s.meteor;
    }
    const double n = static_cast<double>(stats.size());
    out.rouge1 /= n;
    out.rouge2 /= n;
    out.rougeL /= n;
    out.meteor /= n;
    out.bleu = bleu_from_pooled(match.data(), tot.data(), SentenceStats::kMaxBleu, c, r);
    out.chrf_pp = chrf_from_orders(orders, 2.0);
    out.count = stats.size();
    return out;
}

CorpusScores corpus_scores(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references) {
    check_corpus(hypotheses, references);
    std::vector<SentenceStats> stats(hypotheses.size());
    parallel::for_each_index(static_cast<std::ptrdiff_t>(stats.size()),
                             [&](std::ptrdiff_t i) { stats[i] = sentence_stats(hypotheses[i], references[i]); });
    return reduce_stats(stats);
}

}  // namespace medvqa::eval
