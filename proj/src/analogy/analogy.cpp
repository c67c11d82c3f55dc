#include "morphbert/analogy.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <istream>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <thread>

#include "morphbert/common/csv.hpp"
#include "morphbert/common/format.hpp"
#include "morphbert/common/text_io.hpp"
#include "morphbert/common/utf8.hpp"

namespace morphbert::analogy {

namespace {

constexpr std::string_view kPlaceholders[] = {"{w1}", "{w2}", "{w3}", "{w4}"};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::vector<AnalogyEntry> read_dataset(std::istream& in) {
  std::vector<AnalogyEntry> out;
  std::string category;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view text = trim(line);
    if (text.empty() || is_provenance_line(text) || text.front() == '#') continue;
    if (text.front() == ':') {
      category = std::string(trim(text.substr(1)));
      if (category.empty()) {
        throw DatasetError("line " + std::to_string(line_no) + ": empty category name");
      }
      continue;
    }
    const auto words = utf8::split_words(text);
    if (words.size() != 4) {
      throw DatasetError("line " + std::to_string(line_no) + ": expected 4 words, found " +
                         std::to_string(words.size()));
    }
    if (category.empty()) {
      throw DatasetError("line " + std::to_string(line_no) + ": entry before any ': category' line");
    }
    out.push_back({category, std::string(words[0]), std::string(words[1]), std::string(words[2]),
                   std::string(words[3])});
  }
  return out;
}

std::vector<AnalogyEntry> read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open " + path.string());
  return read_dataset(in);
}

MaskSlot parse_mask_slot(std::string_view text) {
  if (text == "w2") return MaskSlot::kW2;
  if (text == "w4") return MaskSlot::kW4;
  throw std::invalid_argument("mask slot must be w2 or w4, got '" + std::string(text) + "'");
}

TemplateSet TemplateSet::builtin() {
  TemplateSet set;
  set.add("en", std::string(kEnglishTemplate));
  return set;
}

TemplateSet TemplateSet::load(const std::filesystem::path& path) {
  TemplateSet set = builtin();
  std::ifstream in(path);
  if (!in) throw TemplateError("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line.front() == '#') continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw TemplateError(path.string() + ":" + std::to_string(line_no) +
                          ": expected language<TAB>template");
    }
    try {
      set.add(std::string(trim(std::string_view(line).substr(0, tab))), line.substr(tab + 1));
    } catch (const TemplateError& e) {
      throw TemplateError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return set;
}

void TemplateSet::add(std::string language, std::string text) {
  if (language.empty()) throw TemplateError("template language is empty");
  for (const std::string_view ph : kPlaceholders) {
    const std::size_t at = text.find(ph);
    if (at == std::string::npos) {
      throw TemplateError("template for '" + language + "' lacks " + std::string(ph));
    }
    if (text.find(ph, at + 1) != std::string::npos) {
      throw TemplateError("template for '" + language + "' repeats " + std::string(ph));
    }
    if (at > 0 && text[at - 1] != ' ' && text[at - 1] != '\t') {
      throw TemplateError("placeholder " + std::string(ph) + " in template for '" + language +
                          "' must start a word");
    }
  }
  templates_[std::move(language)] = std::move(text);
}

const std::string& TemplateSet::get(std::string_view language) const {
  const auto it = templates_.find(language);
  if (it == templates_.end()) {
    throw TemplateError("no analogy template configured for language '" + std::string(language) +
                        "'");
  }
  return it->second;
}

bool TemplateSet::contains(std::string_view language) const {
  return templates_.find(language) != templates_.end();
}

Probe build_probe(const AnalogyEntry& entry, const subword::Encoder& encoder,
                  std::string_view template_text, MaskSlot slot) {
  const std::string* words[] = {&entry.w1, &entry.w2, &entry.w3, &entry.w4};
  const std::size_t slot_index = slot == MaskSlot::kW2 ? 1 : 3;
  const std::string_view slot_ph = kPlaceholders[slot_index];

  // The placeholder begins a whitespace token, so its token index survives
  // substitution of single words.
  std::size_t token = 0;
  bool found = false;
  for (const std::string_view w : utf8::split_words(template_text)) {
    if (w.substr(0, slot_ph.size()) == slot_ph) {
      found = true;
      break;
    }
    ++token;
  }
  if (!found) throw ProbeError("template has no " + std::string(slot_ph) + " token");

  std::string text(template_text);
  for (std::size_t i = 0; i < 4; ++i) {
    const std::string& w = *words[i];
    if (w.empty() || utf8::split_words(w).size() != 1) {
      throw ProbeError("analogy words must be single non-empty tokens");
    }
    const std::size_t at = text.find(kPlaceholders[i]);
    if (at == std::string::npos) throw ProbeError("template lacks " + std::string(kPlaceholders[i]));
    text.replace(at, kPlaceholders[i].size(), w);
  }

  Probe probe;
  probe.text = text;
  probe.masked_word = *words[slot_index];
  probe.gold_pieces = encoder.encode_word(probe.masked_word);

  const subword::Encoding enc = encoder.encode(text);
  if (token >= enc.word_spans.size()) throw ProbeError("slot token outside the encoding");
  const subword::WordSpan span = enc.word_spans[token];
  const auto& gold = probe.gold_pieces;
  if (gold.empty() || gold.size() > span.size() ||
      !std::equal(gold.begin(), gold.end(), enc.ids.begin() + static_cast<std::ptrdiff_t>(span.begin))) {
    throw ProbeError("pieces of '" + probe.masked_word + "' are not separable in: " + text);
  }

  const auto& sp = encoder.vocab().specials();
  probe.ids.reserve(enc.ids.size() + 2);
  probe.ids.push_back(sp.bos);
  probe.ids.insert(probe.ids.end(), enc.ids.begin(), enc.ids.end());
  probe.ids.push_back(sp.eos);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const std::size_t pos = span.begin + i + 1;
    probe.ids[pos] = sp.mask;
    probe.mask_positions.push_back(pos);
  }
  return probe;
}

namespace {

struct Beam {
  std::vector<PieceId> pieces;
  double score = 0.0;
};

bool beam_before(const Beam& a, const Beam& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.pieces < b.pieces;
}

bool may_extend(const subword::Vocabulary& vocab, PieceId piece, std::size_t step) {
  if (!vocab.valid(piece) || vocab.is_special(piece)) return false;
  return vocab.piece(piece).word_begin == (step == 0);
}

std::atomic<std::int64_t> g_request_id{1};

}  // namespace

std::vector<Prediction> predict_word(const Probe& probe, scorer::MaskedLmScorer& scorer,
                                     const subword::Encoder& encoder,
                                     const PredictOptions& options) {
  const subword::Vocabulary& vocab = encoder.vocab();
  const std::size_t v = scorer.vocab_size();
  const std::size_t m = probe.mask_positions.size();
  if (m == 0 || options.k == 0 || options.beam == 0) return {};

  std::vector<Beam> beams(1);
  for (std::size_t step = 0; step < m; ++step) {
    const bool last = step + 1 == m;
    scorer::ScoreRequest request;
    request.mask_positions = {probe.mask_positions[step]};
    request.k = std::min(v, last ? std::max(options.beam, options.k) : options.beam);

    std::vector<Beam> next;
    for (const Beam& b : beams) {
      request.id = g_request_id.fetch_add(1, std::memory_order_relaxed);
      request.ids = probe.ids;
      for (std::size_t j = 0; j < step; ++j) request.ids[probe.mask_positions[j]] = b.pieces[j];
      const scorer::ScoreResponse response = scorer.score(request);
      scorer::check_response(request, response, v);
      for (const scorer::Candidate& c : response.candidates.front()) {
        if (!may_extend(vocab, c.piece, step)) continue;
        Beam e{b.pieces, b.score + c.logp};
        e.pieces.push_back(c.piece);
        next.push_back(std::move(e));
      }
    }
    std::sort(next.begin(), next.end(), beam_before);
    if (!last && next.size() > options.beam) next.resize(options.beam);
    beams = std::move(next);
    if (beams.empty()) return {};
  }

  std::vector<Prediction> out;
  std::set<std::string> seen;
  for (Beam& b : beams) {
    std::string word = encoder.decode(b.pieces);
    if (word.empty() || !seen.insert(word).second) continue;
    out.push_back({std::move(word), std::move(b.pieces), b.score});
    if (out.size() == options.k) break;
  }
  return out;
}

EvalReport evaluate(std::span<const AnalogyEntry> dataset, scorer::MaskedLmScorer& scorer,
                    const subword::Encoder& encoder, const TemplateSet& templates,
                    std::string_view language, const EvalOptions& options) {
  const std::string& tmpl = templates.get(language);
  if (scorer.vocab_size() != encoder.vocab().size()) {
    throw scorer::ProtocolError("scorer vocabulary has " + std::to_string(scorer.vocab_size()) +
                                " pieces, local vocabulary has " +
                                std::to_string(encoder.vocab().size()));
  }
  std::vector<Probe> probes;
  probes.reserve(dataset.size());
  for (const AnalogyEntry& e : dataset) probes.push_back(build_probe(e, encoder, tmpl, options.slot));

  std::vector<std::optional<std::vector<std::string>>> ranked(dataset.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::mutex mu;
  std::string scorer_error;
  std::exception_ptr other_error;

  auto work = [&] {
    while (!stop.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= probes.size()) return;
      try {
        std::vector<std::string> words;
        for (Prediction& p : predict_word(probes[i], scorer, encoder, options.predict)) {
          words.push_back(std::move(p.word));
        }
        ranked[i] = std::move(words);
      } catch (const scorer::ScorerError& e) {
        std::lock_guard lock(mu);
        if (scorer_error.empty()) scorer_error = e.what();
        stop = true;
      } catch (...) {
        std::lock_guard lock(mu);
        if (!other_error) other_error = std::current_exception();
        stop = true;
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(options.threads, probes.size()));
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(work);
    work();
  }
  if (other_error) std::rethrow_exception(other_error);

  EvalReport report;
  report.total = dataset.size();
  metrics::PrecisionAtK acc(options.predict.k);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (!ranked[i]) continue;
    ++report.evaluated;
    acc.add(dataset[i].category, probes[i].masked_word, *ranked[i]);
  }
  report.score = acc.finish();
  report.partial = !scorer_error.empty();
  report.error = scorer_error;
  return report;
}

void write_report_csv(std::ostream& out, const metrics::AnalogyScore& score) {
  out << "category,n,hits,p_at_5\n";
  std::size_t n = 0;
  std::size_t hits = 0;
  for (const metrics::CategoryScore& c : score.categories) {
    out << csv::field(c.category) << ',' << c.n << ',' << c.hits << ',' << format_double(c.p_at_k)
        << '\n';
    n += c.n;
    hits += c.hits;
  }
  out << "macro," << n << ',' << hits << ',' << format_double(score.macro) << '\n';
}

}  // namespace morphbert::analogy
