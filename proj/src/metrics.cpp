#include "css/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include "css/errors.hpp"

namespace css {

bool is_counted_token(std::string_view token) { return token != kEosToken && token != kPadToken; }

namespace {

std::size_t counted_length(const std::vector<std::string>& r) {
  return static_cast<std::size_t>(std::count_if(r.begin(), r.end(), [](const auto& t) { return is_counted_token(t); }));
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

LengthStats length_stats(const ResponseSet& rs) {
  if (rs.responses.empty()) throw InputError("length statistics of an empty response set");
  std::vector<std::size_t> lens;
  lens.reserve(rs.responses.size());
  std::size_t total = 0;
  for (const auto& r : rs.responses) {
    lens.push_back(counted_length(r));
    total += lens.back();
  }
  std::sort(lens.begin(), lens.end());
  const std::size_t n = lens.size();
  LengthStats s;
  s.mean = static_cast<double>(total) / static_cast<double>(n);
  s.median = n % 2 ? static_cast<double>(lens[n / 2]) : (static_cast<double>(lens[n / 2 - 1]) + lens[n / 2]) / 2.0;
  return s;
}

DiversityCounts diversity_counts(const ResponseSet& rs) {
  std::unordered_set<std::string> seen;
  DiversityCounts c;
  for (const auto& r : rs.responses) {
    for (const auto& t : r) {
      if (!is_counted_token(t)) continue;
      ++c.total;
      seen.insert(t);
    }
  }
  c.unique = seen.size();
  return c;
}

double diversity(const ResponseSet& rs) {
  auto c = diversity_counts(rs);
  if (c.total == 0) throw InputError("diversity of a response set with no tokens");
  return static_cast<double>(c.unique) / static_cast<double>(c.total);
}

std::vector<double> read_scores(std::istream& in) {
  std::vector<double> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = trim(line);
    if (t.empty()) continue;
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(t, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != t.size()) throw InputError("line " + std::to_string(lineno) + ": not a number: '" + t + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<double> read_scores(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scores file " + path.string());
  return read_scores(in);
}

double aggregate_specificity(std::span<const double> scores, std::size_t responses) {
  if (scores.size() != responses) {
    throw InputError(std::to_string(scores.size()) + " specificity scores for " + std::to_string(responses) +
                     " responses");
  }
  if (scores.empty()) throw InputError("no specificity scores");
  double sum = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!(scores[i] >= 0.0 && scores[i] <= 1.0)) {
      throw InputError("specificity score " + std::to_string(i + 1) + " is outside [0, 1]: " + fixed(scores[i]));
    }
    sum += scores[i];
  }
  return sum / static_cast<double>(scores.size());
}

MetricsReport make_report(const ResponseSet& rs, std::optional<std::span<const double>> scores) {
  MetricsReport r;
  r.model = rs.model;
  auto ls = length_stats(rs);
  r.median_len = ls.median;
  r.mean_len = ls.mean;
  r.diversity = diversity(rs);
  if (scores) r.mean_specificity = aggregate_specificity(*scores, rs.responses.size());
  return r;
}

void write_report_csv(std::ostream& out, std::span<const MetricsReport> rows) {
  out << "model,median_len,mean_len,diversity,mean_specificity\n";
  for (const auto& r : rows) {
    out << r.model << ',' << fixed(r.median_len) << ',' << fixed(r.mean_len) << ',' << fixed(r.diversity) << ',';
    if (r.mean_specificity) out << fixed(*r.mean_specificity);
    out << '\n';
  }
}

std::vector<std::vector<std::string>> read_user_turns(std::istream& in) {
  std::vector<std::vector<std::string>> convs;
  std::vector<std::string> cur;
  std::string line;
  while (std::getline(in, line)) {
    auto t = trim(line);
    if (t.empty()) {
      if (!cur.empty()) convs.push_back(std::move(cur));
      cur.clear();
      continue;
    }
    cur.push_back(std::move(t));
  }
  if (!cur.empty()) convs.push_back(std::move(cur));
  return convs;
}

std::vector<std::vector<std::string>> read_user_turns(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open transcript file " + path.string());
  return read_user_turns(in);
}

ReplayResult replay_transcripts(std::span<const std::vector<std::string>> conversations, const Chatbot& bot,
                                const GenerationOptions& gen, std::string model_name) {
  ReplayResult out;
  out.responses.model = std::move(model_name);
  for (const auto& conv : conversations) {
    if (conv.empty()) {
      ++out.skipped;
      continue;
    }
    auto state = bot.new_state();
    for (const auto& utterance : conv) {
      auto reply = bot.respond(state, utterance, gen);
      out.responses.responses.push_back(decode(bot.vocab(), reply.ids));
    }
    out.transcripts.push_back(std::move(state));
  }
  return out;
}

void write_transcripts(std::ostream& out, std::span<const DialogueState> transcripts) {
  for (std::size_t i = 0; i < transcripts.size(); ++i) {
    if (i) out << '\n';
    for (const auto& t : transcripts[i].turns()) out << speaker_name(t.speaker) << ": " << t.text << '\n';
  }
}

}  // namespace css
