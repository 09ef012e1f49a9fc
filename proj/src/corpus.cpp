#include "css/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <stdexcept>

#include "css/errors.hpp"
#include "css/random.hpp"

namespace css {

namespace {

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

bool has_alnum(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; });
}

std::string collapse_spaces(std::string_view s) {
  std::string out;
  bool pending = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending = !out.empty();
      continue;
    }
    if (pending) out += ' ';
    pending = false;
    out += c;
  }
  return out;
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

}  // namespace

// ---------------------------------------------------------------------------
// Cornell

std::vector<std::string> split_cornell_fields(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(kCornellDelimiter, start);
    if (pos == std::string_view::npos) {
      fields.emplace_back(line.substr(start));
      break;
    }
    fields.emplace_back(line.substr(start, pos - start));
    start = pos + kCornellDelimiter.size();
  }
  return fields;
}

namespace {

std::vector<std::string> parse_id_list(std::string_view field) {
  std::vector<std::string> ids;
  std::size_t i = 0;
  while (i < field.size()) {
    const char q = field[i];
    if (q == '\'' || q == '"') {
      const auto end = field.find(q, i + 1);
      if (end == std::string_view::npos) return {};
      ids.emplace_back(field.substr(i + 1, end - i - 1));
      i = end + 1;
    } else {
      ++i;
    }
  }
  return ids;
}

}  // namespace

CornellCorpus parse_cornell(std::istream& lines, std::istream& conversations) {
  CornellCorpus corpus;
  std::map<std::string, std::string> text_by_id;
  std::string line;
  while (std::getline(lines, line)) {
    strip_cr(line);
    if (line.empty()) continue;
    auto fields = split_cornell_fields(line);
    if (fields.size() < 5) {
      ++corpus.malformed_lines;
      continue;
    }
    std::string text = fields[4];
    for (std::size_t f = 5; f < fields.size(); ++f) text += std::string(kCornellDelimiter) + fields[f];
    text_by_id[fields[0]] = std::move(text);
  }

  std::size_t ordinal = 0;
  while (std::getline(conversations, line)) {
    strip_cr(line);
    if (line.empty()) continue;
    auto fields = split_cornell_fields(line);
    auto ids = fields.size() == 4 ? parse_id_list(fields[3]) : std::vector<std::string>{};
    if (ids.empty()) {
      ++corpus.malformed_conversations;
      continue;
    }
    const std::string base_id = fields[2] + ":" + std::to_string(ordinal++);
    Conversation current{base_id, {}};
    std::size_t segment = 0;
    auto flush = [&] {
      if (!current.turns.empty()) corpus.conversations.push_back(std::move(current));
      current = Conversation{base_id + "#" + std::to_string(++segment), {}};
    };
    for (const auto& id : ids) {
      auto it = text_by_id.find(id);
      if (it == text_by_id.end()) {
        ++corpus.unresolved_ids;
        flush();
        continue;
      }
      current.turns.push_back(it->second);
    }
    flush();
  }
  corpus.pairs = adjacent_pairs(corpus.conversations);
  return corpus;
}

CornellCorpus parse_cornell(const std::filesystem::path& lines_file, const std::filesystem::path& conversations_file) {
  auto lines = open_or_throw(lines_file);
  auto convs = open_or_throw(conversations_file);
  return parse_cornell(lines, convs);
}

std::vector<TextPair> adjacent_pairs(std::span<const Conversation> conversations) {
  std::vector<TextPair> pairs;
  for (std::size_t c = 0; c < conversations.size(); ++c) {
    const auto& turns = conversations[c].turns;
    for (std::size_t t = 0; t + 1 < turns.size(); ++t) pairs.push_back({turns[t], turns[t + 1], c, t});
  }
  return pairs;
}

// ---------------------------------------------------------------------------
// SwDA

bool read_csv_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  std::string field;
  bool in_quotes = false;
  bool any = false;
  int ch;
  while ((ch = in.get()) != EOF) {
    any = true;
    const char c = static_cast<char>(ch);
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          field += '"';
          in.get();
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      fields.push_back(std::move(field));
      return true;
    } else if (c != '\r') {
      field += c;
    }
  }
  if (!any) return false;
  fields.push_back(std::move(field));
  return true;
}

std::string strip_disfluency(std::string_view text) {
  std::string kept;
  std::vector<std::string> annotations;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const char c = text[i];
    if (c == '<') {
      int depth = 0;
      std::size_t j = i;
      std::string inner;
      for (; j < n; ++j) {
        if (text[j] == '<') {
          ++depth;
        } else if (text[j] == '>') {
          if (--depth == 0) break;
        } else {
          inner += text[j];
        }
      }
      if (j >= n) {  // unbalanced: drop the bracket only
        ++i;
        continue;
      }
      auto words = collapse_spaces(inner);
      if (!words.empty()) {
        std::string tag;
        for (char w : words) tag += w == ' ' ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(w)));
        annotations.push_back("[" + tag + "]");
      }
      kept += ' ';
      i = j + 1;
      continue;
    }
    if (c == '{') {
      ++i;
      if (i < n && std::isupper(static_cast<unsigned char>(text[i]))) ++i;
      kept += ' ';
      continue;
    }
    if (c == '[') {
      // "[Laughter]" stays; "[ I, + I ]" restart brackets go.
      std::size_t j = i + 1;
      while (j < n && text[j] != ']' && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
      if (j < n && text[j] == ']' && j > i + 1) {
        kept.append(text.substr(i, j - i + 1));
        i = j + 1;
        continue;
      }
      kept += ' ';
      ++i;
      continue;
    }
    if (c == '}' || c == ']' || c == '+' || c == '/' || c == '#') {
      kept += ' ';
      ++i;
      continue;
    }
    if (c == '-' && i + 1 < n && text[i + 1] == '-') {
      kept += ' ';
      i += 2;
      continue;
    }
    kept += c;
    ++i;
  }
  auto cleaned = collapse_spaces(kept);
  if (!has_alnum(cleaned) && !annotations.empty()) {
    std::string out;
    for (const auto& a : annotations) {
      if (!out.empty()) out += ' ';
      out += a;
    }
    return out;
  }
  return cleaned;
}

SwdaCorpus parse_swda_csv(std::istream& in, const std::string& fallback_conversation, const SwdaOptions& options) {
  SwdaCorpus corpus;
  corpus.files = 1;
  std::vector<std::string> header;
  if (!read_csv_record(in, header)) return corpus;
  auto column = [&](const std::string& name) -> std::ptrdiff_t {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : std::distance(header.begin(), it);
  };
  const auto act_col = column(options.act_column);
  const auto text_col = column(options.text_column);
  const auto conv_col = column(options.conversation_column);
  if (act_col < 0 || text_col < 0) {
    throw InputError("SwDA file " + fallback_conversation + " lacks '" + options.act_column + "' or '" +
                     options.text_column + "' column");
  }
  const auto needed = static_cast<std::size_t>(std::max(act_col, text_col));
  std::map<std::string, std::size_t> next_turn;
  std::vector<std::string> row;
  while (read_csv_record(in, row)) {
    if (row.size() == 1 && row[0].empty()) continue;  // blank line
    if (row.size() <= needed) {
      ++corpus.skipped_rows;
      continue;
    }
    TaggedUtterance u;
    u.act_tag = row[static_cast<std::size_t>(act_col)];
    u.text = strip_disfluency(row[static_cast<std::size_t>(text_col)]);
    u.tokens = tokenize(u.text);
    if (u.tokens.empty() || u.act_tag.empty()) {
      ++corpus.skipped_rows;
      continue;
    }
    u.conversation = fallback_conversation;
    if (conv_col >= 0 && static_cast<std::size_t>(conv_col) < row.size() && !row[static_cast<std::size_t>(conv_col)].empty()) {
      u.conversation = row[static_cast<std::size_t>(conv_col)];
    }
    u.turn = next_turn[u.conversation]++;
    corpus.utterances.push_back(std::move(u));
  }
  return corpus;
}

SwdaCorpus parse_swda(const std::filesystem::path& csv_dir, const SwdaOptions& options) {
  namespace fs = std::filesystem;
  if (!fs::exists(csv_dir)) throw IoError("SwDA path does not exist: " + csv_dir.string());
  std::vector<fs::path> files;
  if (fs::is_directory(csv_dir)) {
    for (const auto& entry : fs::recursive_directory_iterator(csv_dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(csv_dir);
  }
  SwdaCorpus all;
  for (const auto& f : files) {
    auto in = open_or_throw(f);
    auto part = parse_swda_csv(in, f.stem().string(), options);
    all.skipped_rows += part.skipped_rows;
    all.files += 1;
    for (auto& u : part.utterances) all.utterances.push_back(std::move(u));
  }
  return all;
}

// ---------------------------------------------------------------------------
// Bucketing

BucketedBatch make_batch(std::span<const DialoguePair> pairs, std::span<const std::size_t> rows, std::size_t bucket) {
  BucketedBatch batch;
  batch.bucket = bucket;
  batch.source.assign(rows.begin(), rows.end());
  batch.utterances = IdMatrix{rows.size(), bucket, std::vector<int>(rows.size() * bucket, kPadId)};
  batch.responses = IdMatrix{rows.size(), bucket + 1, std::vector<int>(rows.size() * (bucket + 1), kPadId)};
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& pair = pairs[rows[r]];
    std::vector<int> utt = pair.utterance.ids;
    if (utt.empty()) utt.push_back(kUnkId);
    const auto& resp = pair.response.ids;
    if (utt.size() > bucket || resp.size() + 1 > bucket) {
      throw std::length_error("pair " + std::to_string(rows[r]) + " does not fit bucket " + std::to_string(bucket));
    }
    std::copy(utt.begin(), utt.end(), batch.utterances.ids.begin() + static_cast<std::ptrdiff_t>(r * bucket));
    auto out = batch.responses.ids.begin() + static_cast<std::ptrdiff_t>(r * (bucket + 1));
    *out++ = kSosId;
    out = std::copy(resp.begin(), resp.end(), out);
    *out = kEosId;
    batch.utterance_lengths.push_back(static_cast<int>(utt.size()));
    batch.response_lengths.push_back(static_cast<int>(resp.size()));
  }
  return batch;
}

BatchPlan bucket_batches(std::span<const DialoguePair> pairs, std::span<const std::size_t> bucket_bounds,
                         std::size_t batch_size, std::uint64_t seed) {
  if (bucket_bounds.empty() || !std::is_sorted(bucket_bounds.begin(), bucket_bounds.end()) ||
      std::adjacent_find(bucket_bounds.begin(), bucket_bounds.end()) != bucket_bounds.end()) {
    throw std::invalid_argument("bucket bounds must be non-empty and strictly ascending");
  }
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");

  BatchPlan plan;
  std::vector<std::vector<std::size_t>> members(bucket_bounds.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const std::size_t need = std::max<std::size_t>({pairs[i].utterance.size(), 1, pairs[i].response.size() + 1});
    auto it = std::lower_bound(bucket_bounds.begin(), bucket_bounds.end(), need);
    if (it == bucket_bounds.end()) {
      ++plan.dropped;
      continue;
    }
    members[static_cast<std::size_t>(it - bucket_bounds.begin())].push_back(i);
  }
  Rng rng(seed);
  for (std::size_t b = 0; b < members.size(); ++b) {
    auto& idx = members[b];
    rng.shuffle(idx);
    for (std::size_t start = 0; start < idx.size(); start += batch_size) {
      const std::size_t end = std::min(idx.size(), start + batch_size);
      plan.batches.push_back(
          make_batch(pairs, std::span<const std::size_t>(idx).subspan(start, end - start), bucket_bounds[b]));
    }
  }
  rng.shuffle(plan.batches);
  return plan;
}

}  // namespace css
