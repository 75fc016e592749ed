#include "teleop/bundle.hpp"

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <cstdio>
#include <sstream>

namespace teleop {
namespace {

void append(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

void append(std::string& out, std::uint64_t v) {
  char buf[24];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

template <typename Derived>
void append_vec(std::string& out, const Eigen::MatrixBase<Derived>& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    append(out, v[i]);
    out += ',';
  }
}

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (ctx_ == nullptr || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) {
      throw std::runtime_error("sha256: digest init failed");
    }
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(std::string_view data) { EVP_DigestUpdate(ctx_, data.data(), data.size()); }
  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_, md.data(), &len);
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string s;
    for (unsigned int i = 0; i < len; ++i) {
      s += kDigits[md[i] >> 4];
      s += kDigits[md[i] & 0xF];
    }
    return s;
  }

 private:
  EVP_MD_CTX* ctx_;
};

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
}

template <typename T>
T parse_number(std::string_view s, const char* what) {
  T v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument(std::string("bad number in ") + what + " '" + std::string(s) + "'");
  }
  return v;
}

template <typename F>
auto parse_field(std::string_view s, const char* what, F&& parse) {
  try {
    return parse(s);
  } catch (const std::exception&) {
    throw std::invalid_argument(std::string("bad ") + what + " '" + std::string(s) + "'");
  }
}

}  // namespace

std::uint64_t parse_time_us(std::string_view s) {
  const auto dot = s.find('.');
  const std::string_view whole = s.substr(0, dot);
  const std::string_view frac = dot == std::string_view::npos ? std::string_view{} : s.substr(dot + 1);
  if (frac.size() > 6) throw std::invalid_argument("timestamp '" + std::string(s) + "' is finer than 1 us");
  std::uint64_t us = parse_number<std::uint64_t>(whole, "t_s") * 1000000;
  if (!frac.empty()) {
    std::uint64_t f = parse_number<std::uint64_t>(frac, "t_s");
    for (std::size_t i = frac.size(); i < 6; ++i) f *= 10;
    us += f;
  }
  return us;
}

LogRow parse_log_row(std::string_view line) {
  std::vector<std::string_view> f;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    f.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  constexpr std::size_t kColumns = 37;
  if (f.size() != kColumns) {
    throw std::invalid_argument("expected " + std::to_string(kColumns) + " fields, got " + std::to_string(f.size()));
  }
  LogRow r;
  r.t_us = parse_time_us(f[0]);
  std::size_t i = 1;
  const auto vec = [&](auto& v, const char* what) {
    for (Eigen::Index a = 0; a < v.size(); ++a) v[a] = parse_number<double>(f[i++], what);
  };
  vec(r.q, "q");
  vec(r.elbow, "elbow");
  vec(r.wrist, "wrist");
  vec(r.leader, "leader");
  vec(r.mapped, "mapped");
  r.grab = parse_field(f[i++], "grab_state", [](std::string_view v) { return parse_grab_state(v); });
  vec(r.fs, "Fs");
  vec(r.fa, "Fa");
  vec(r.tau, "tau");
  r.trial_id = parse_number<std::uint32_t>(f[i++], "trial_id");
  r.pose = parse_field(f[i++], "pose_id", [](std::string_view v) { return parse_pose(v); });
  r.phase = parse_field(f[i++], "phase", [](std::string_view v) { return parse_phase(v); });
  r.condition = parse_field(f[i++], "condition", [](std::string_view v) { return parse_condition(v); });
  r.block = parse_number<std::uint8_t>(f[i++], "block");
  return r;
}

class BundleWriter::HashedFile {
 public:
  explicit HashedFile(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot create '" + path.string() + "'");
  }
  void write(std::string_view s) {
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
    hash_.update(s);
  }
  std::string close() {
    out_.close();
    if (!out_) throw std::runtime_error("write failed");
    return hash_.hex();
  }

 private:
  std::ofstream out_;
  Sha256 hash_;
};

std::string format_time_us(std::uint64_t t_us) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%llu.%06llu", static_cast<unsigned long long>(t_us / 1000000),
                static_cast<unsigned long long>(t_us % 1000000));
  return buf;
}

std::string log_header() {
  std::string h = "t_s,";
  for (int i = 1; i <= 6; ++i) h += "q" + std::to_string(i) + ",";
  for (const char* p : {"elbow", "wrist", "leader", "mapped"}) {
    for (const char* a : {"x", "y", "z"}) h += std::string(p) + "_" + a + ",";
  }
  h += "grab_state,";
  for (const char* p : {"Fs", "Fa"}) {
    for (const char* a : {"x", "y", "z"}) h += std::string(p) + "_" + a + ",";
  }
  for (int i = 1; i <= 6; ++i) h += "tau" + std::to_string(i) + ",";
  h += "trial_id,pose_id,phase,condition,block\n";
  return h;
}

std::string format_log_row(const LogRow& r) {
  std::string s = format_time_us(r.t_us);
  s += ',';
  append_vec(s, r.q);
  append_vec(s, r.elbow);
  append_vec(s, r.wrist);
  append_vec(s, r.leader);
  append_vec(s, r.mapped);
  s += to_string(r.grab);
  s += ',';
  append_vec(s, r.fs);
  append_vec(s, r.fa);
  append_vec(s, r.tau);
  append(s, std::uint64_t{r.trial_id});
  s += ',';
  s += to_string(r.pose);
  s += ',';
  s += to_string(r.phase);
  s += ',';
  s += to_string(r.condition);
  s += ',';
  append(s, std::uint64_t{r.block});
  s += '\n';
  return s;
}

std::string events_header() { return "t_s,event,trial_id,pose,condition,block,familiarization\n"; }

std::string format_event(const TaskEvent& e) {
  std::string s = format_time_us(static_cast<std::uint64_t>(std::llround(e.t * 1e6)));
  s += ',';
  s += to_string(e.kind);
  s += ',';
  append(s, std::uint64_t{e.trial.trial_id});
  s += ',';
  s += to_string(e.trial.pose);
  s += ',';
  s += to_string(e.trial.condition);
  s += ',';
  append(s, std::uint64_t{e.trial.block});
  s += e.trial.familiarization ? ",1\n" : ",0\n";
  return s;
}

std::string sha256_hex(std::string_view data) {
  Sha256 h;
  h.update(data);
  return h.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  Sha256 h;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    h.update(std::string_view(buf.data(), static_cast<std::size_t>(in.gcount())));
  }
  return h.hex();
}

BundleWriter::BundleWriter(const std::filesystem::path& dir, const SessionConfig& config)
    : dir_(dir), config_(config) {
  std::filesystem::create_directories(dir_);
  log_ = std::make_unique<HashedFile>(dir_ / kLogFile);
  events_ = std::make_unique<HashedFile>(dir_ / kEventsFile);
  log_->write(log_header());
  events_->write(events_header());
}

BundleWriter::~BundleWriter() = default;

void BundleWriter::on_row(const LogRow& row) { log_->write(format_log_row(row)); }

void BundleWriter::on_event(const TaskEvent& event) { events_->write(format_event(event)); }

std::filesystem::path BundleWriter::finish(const SessionResult& result) {
  if (result.status == SessionStatus::Faulted) {
    const std::string marker = std::string(kTruncationMarker) + ": " + result.fault + "\n";
    log_->write(marker);
    events_->write(marker);
  }
  const std::string log_hash = log_->close();
  const std::string events_hash = events_->close();

  SessionConfig cfg = config_;
  cfg.seed = result.seed;
  cfg.output_dir = ".";
  const std::string config_text = to_toml(cfg);
  write_text(dir_ / kConfigFile, config_text);
  const std::string config_hash = sha256_hex(config_text);

  std::size_t analyzed = 0;
  std::size_t familiarization = 0;
  std::size_t confirmed = 0;
  std::size_t timed_out = 0;
  std::size_t skipped = 0;
  for (const auto& t : result.trials) {
    (t.spec.familiarization ? familiarization : analyzed) += 1;
    if (t.confirmed_at) ++confirmed;
    if (t.timed_out) ++timed_out;
    if (t.skipped) ++skipped;
  }

  nlohmann::ordered_json m;
  m["format_version"] = 1;
  m["seed"] = result.seed;
  m["config_sha256"] = config_hash;
  m["status"] = std::string(to_string(result.status));
  if (!result.fault.empty()) m["fault"] = result.fault;
  m["transport"] = std::string(to_string(config_.transport));
  m["condition_order"] = std::string(to_string(config_.schedule.order));
  m["trials"] = {{"analyzed", analyzed},       {"familiarization", familiarization}, {"confirmed", confirmed},
                 {"timed_out", timed_out},     {"skipped", skipped},                 {"scheduled", result.schedule.trials.size()}};
  m["ticks"] = result.ticks;
  m["sim_time_s"] = result.sim_time;
  m["link"] = {{"submitted", result.link.submitted}, {"dropped", result.link.dropped}, {"delivered", result.link.delivered}};
  m["malformed_datagrams"] = result.malformed;
  m["stale_datagrams"] = result.stale;
  m["files"] = {{kConfigFile, config_hash}, {kEventsFile, events_hash}, {kLogFile, log_hash}};
  const auto path = dir_ / kManifestFile;
  write_text(path, m.dump(2) + "\n");
  return path;
}

}  // namespace teleop
