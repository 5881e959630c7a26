#include "hmmse/labels.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "hmmse/error.hpp"

namespace hmmse {
namespace {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    if (!std::filesystem::exists(path)) throw Error(ErrorCode::NotFound, path.string());
    throw Error(ErrorCode::IoError, "cannot open " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream in{std::string(line)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool parse_int64(const std::string& s, std::int64_t& v) {
  if (s.empty()) return false;
  std::size_t used = 0;
  try {
    v = std::stoll(s, &used);
  } catch (...) {
    return false;
  }
  return used == s.size();
}

// Folds case and strips everything except letters, digits and apostrophes.
std::string fold_word(std::string_view token) {
  std::string out;
  for (unsigned char c : token) {
    if (std::isalnum(c) || c == '\'') out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

}  // namespace

PhoneSet::PhoneSet(std::set<std::string> phones) : phones_(phones.begin(), phones.end()) {}

const PhoneSet& PhoneSet::arpabet() {
  static const PhoneSet set(std::set<std::string>{
      "aa", "ae", "ah", "ao", "aw", "ay", "b",  "ch", "d",  "dh", "eh", "er", "ey", "f",
      "g",  "hh", "ih", "iy", "jh", "k",  "l",  "m",  "n",  "ng", "ow", "oy", "p",  "r",
      "s",  "sh", "t",  "th", "uh", "uw", "v",  "w",  "y",  "z",  "zh", "sil"});
  return set;
}

bool PhoneSet::contains(std::string_view phone) const { return phones_.find(phone) != phones_.end(); }

std::vector<PhoneLabel> parse_labels(std::string_view text, const PhoneSet& phone_set) {
  std::vector<PhoneLabel> labels;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  std::optional<bool> timed;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    PhoneLabel label;
    if (tokens.size() == 1) {
      label.phoneme = tokens[0];
    } else if (tokens.size() == 3) {
      std::int64_t s = 0, e = 0;
      if (!parse_int64(tokens[0], s) || !parse_int64(tokens[1], e)) {
        throw Error(ErrorCode::MalformedLine, "line " + std::to_string(line_no) + ": bad timestamps");
      }
      label.start = s;
      label.end = e;
      label.phoneme = tokens[2];
    } else {
      throw Error(ErrorCode::MalformedLine, "line " + std::to_string(line_no) + ": expected \"[start end] phoneme\"");
    }
    if (!phone_set.contains(label.phoneme)) {
      throw Error(ErrorCode::MalformedLine,
                  "line " + std::to_string(line_no) + ": unknown phoneme '" + label.phoneme + "'");
    }
    if (timed && *timed != label.timed()) {
      throw Error(ErrorCode::MalformedLine, "line " + std::to_string(line_no) + ": mixes timed and untimed labels");
    }
    timed = label.timed();
    if (label.timed()) {
      if (*label.start < 0 || *label.start >= *label.end) {
        throw Error(ErrorCode::NonMonotonicTimes, "line " + std::to_string(line_no) + ": start must precede end");
      }
      if (!labels.empty() && *labels.back().end != *label.start) {
        throw Error(ErrorCode::NonMonotonicTimes,
                    "line " + std::to_string(line_no) +
                        (*labels.back().end > *label.start ? ": overlaps previous label" : ": gap after previous label"));
      }
    }
    labels.push_back(std::move(label));
  }
  if (labels.empty()) throw Error(ErrorCode::EmptyLabelFile, "no labels");
  return labels;
}

std::vector<PhoneLabel> parse_label_file(const std::filesystem::path& path, const PhoneSet& phone_set) {
  try {
    return parse_labels(read_text(path), phone_set);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NotFound || e.code() == ErrorCode::IoError) throw;
    throw Error(e.code(), path.string() + ": " + std::string(e.what()).substr(to_string(e.code()).size() + 2));
  }
}

std::string format_labels(const std::vector<PhoneLabel>& labels) {
  std::ostringstream out;
  for (const auto& l : labels) {
    if (l.timed()) out << *l.start << ' ' << *l.end << ' ';
    out << l.phoneme << '\n';
  }
  return out.str();
}

void write_label_file(const std::vector<PhoneLabel>& labels, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out << format_labels(labels);
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

void Lexicon::add(std::string_view word, std::vector<std::string> pronunciation, const PhoneSet& phone_set) {
  if (pronunciation.empty()) throw Error(ErrorCode::MalformedLine, "empty pronunciation for '" + std::string(word) + "'");
  for (const auto& p : pronunciation) {
    if (!phone_set.contains(p)) {
      throw Error(ErrorCode::MalformedLine, "unknown phoneme '" + p + "' in pronunciation of '" + std::string(word) + "'");
    }
  }
  entries_[lower(word)] = std::move(pronunciation);
}

const std::vector<std::string>* Lexicon::find(std::string_view word) const {
  const auto it = entries_.find(lower(word));
  return it == entries_.end() ? nullptr : &it->second;
}

Lexicon parse_lexicon(std::string_view text, const PhoneSet& phone_set) {
  Lexicon lex;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    if (tokens.size() < 2) {
      throw Error(ErrorCode::MalformedLine, "lexicon line " + std::to_string(line_no) + ": missing pronunciation");
    }
    const std::string word = tokens.front();
    tokens.erase(tokens.begin());
    lex.add(word, std::move(tokens), phone_set);
  }
  return lex;
}

Lexicon load_lexicon(const std::filesystem::path& path, const PhoneSet& phone_set) {
  return parse_lexicon(read_text(path), phone_set);
}

std::vector<PhoneLabel> text_to_phonemes(std::string_view text, const Lexicon& lexicon) {
  std::vector<PhoneLabel> out;
  out.push_back(PhoneLabel{std::string(kSilence), {}, {}, 0, 0});
  for (const auto& token : split_ws(text)) {
    const std::string word = fold_word(token);
    if (word.empty()) continue;
    const auto* pron = lexicon.find(word);
    if (!pron) throw Error(ErrorCode::OutOfVocabulary, word);
    const int n = static_cast<int>(pron->size());
    for (int i = 0; i < n; ++i) out.push_back(PhoneLabel{(*pron)[static_cast<std::size_t>(i)], {}, {}, i + 1, n});
  }
  out.push_back(PhoneLabel{std::string(kSilence), {}, {}, 0, 0});
  return out;
}

std::string ContextLabel::key() const {
  return left2 + "^" + left1 + "-" + center + "+" + right1 + "=" + right2;
}

std::vector<ContextLabel> expand_context(const std::vector<PhoneLabel>& phones, ContextWidth width) {
  if (phones.empty()) throw Error(ErrorCode::EmptySequence, "cannot expand an empty phone sequence");
  const auto n = static_cast<std::ptrdiff_t>(phones.size());
  auto at = [&](std::ptrdiff_t i) -> std::string {
    return (i < 0 || i >= n) ? std::string(kBoundary) : phones[static_cast<std::size_t>(i)].phoneme;
  };
  const bool quin = width == ContextWidth::quinphone;
  std::vector<ContextLabel> out;
  out.reserve(phones.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto& p = phones[static_cast<std::size_t>(i)];
    out.push_back(ContextLabel{quin ? at(i - 2) : std::string(kBoundary), at(i - 1), p.phoneme, at(i + 1),
                               quin ? at(i + 2) : std::string(kBoundary), p.position_in_word, p.word_length});
  }
  return out;
}

std::optional<double> labelled_duration(const std::vector<PhoneLabel>& labels) {
  if (labels.empty() || !labels.front().timed()) return std::nullopt;
  return static_cast<double>(*labels.back().end - *labels.front().start) / kLabelUnitsPerSecond;
}

}  // namespace hmmse
