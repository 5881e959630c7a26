#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace hmmse {

inline constexpr std::string_view kSilence = "sil";
inline constexpr std::string_view kBoundary = "#";

// Label times are in 100 ns units.
inline constexpr std::int64_t kLabelUnitsPerSecond = 10'000'000;

struct PhoneLabel {
  std::string phoneme;
  std::optional<std::int64_t> start;
  std::optional<std::int64_t> end;
  // 1-based position inside the word and the word's phone count; 0 when the
  // label did not come from text (silence, or read from a label file).
  int position_in_word = 0;
  int word_length = 0;

  bool timed() const { return start.has_value(); }
};

class PhoneSet {
 public:
  PhoneSet() = default;
  explicit PhoneSet(std::set<std::string> phones);

  // ARPAbet inventory (39 phones, lower case) plus "sil".
  static const PhoneSet& arpabet();

  bool contains(std::string_view phone) const;
  const std::set<std::string, std::less<>>& phones() const { return phones_; }

 private:
  std::set<std::string, std::less<>> phones_;
};

std::vector<PhoneLabel> parse_label_file(const std::filesystem::path& path,
                                         const PhoneSet& phone_set = PhoneSet::arpabet());
std::vector<PhoneLabel> parse_labels(std::string_view text, const PhoneSet& phone_set = PhoneSet::arpabet());
std::string format_labels(const std::vector<PhoneLabel>& labels);
void write_label_file(const std::vector<PhoneLabel>& labels, const std::filesystem::path& path);

class Lexicon {
 public:
  Lexicon() = default;

  void add(std::string_view word, std::vector<std::string> pronunciation,
           const PhoneSet& phone_set = PhoneSet::arpabet());
  const std::vector<std::string>* find(std::string_view word) const;
  std::size_t size() const { return entries_.size(); }
  const std::map<std::string, std::vector<std::string>, std::less<>>& entries() const { return entries_; }

 private:
  std::map<std::string, std::vector<std::string>, std::less<>> entries_;
};

Lexicon load_lexicon(const std::filesystem::path& path, const PhoneSet& phone_set = PhoneSet::arpabet());
Lexicon parse_lexicon(std::string_view text, const PhoneSet& phone_set = PhoneSet::arpabet());

std::vector<PhoneLabel> text_to_phonemes(std::string_view text, const Lexicon& lexicon);

enum class ContextWidth { triphone, quinphone };

struct ContextLabel {
  std::string left2, left1, center, right1, right2;
  int position_in_word = 0;
  int word_length = 0;

  // Model lookup key, e.g. "a^b-c+d=e". Word position is carried but not
  // part of the key.
  std::string key() const;
};

std::vector<ContextLabel> expand_context(const std::vector<PhoneLabel>& phones, ContextWidth width);

// Total labelled duration in seconds; nullopt for untimed labels.
std::optional<double> labelled_duration(const std::vector<PhoneLabel>& labels);

}  // namespace hmmse
