#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dim/dataio.hpp"
#include "json.hpp"

namespace dim {

int64_t Skeleton::joint_count() const {
  int64_t n = 0;
  for (const Joint& j : joints)
    if (!j.end_site) ++n;
  return n;
}

int64_t Skeleton::channel_count() const {
  int64_t n = 0;
  for (const Joint& j : joints) n += static_cast<int64_t>(j.channels.size());
  return n;
}

std::array<int, 3> Skeleton::rotation_order(int64_t joint) const {
  const Joint& j = joints[static_cast<size_t>(joint)];
  std::array<int, 3> order{};
  int found = 0;
  for (Channel c : j.channels) {
    switch (c) {
      case Channel::kXrot:
        order[static_cast<size_t>(found++)] = 0;
        break;
      case Channel::kYrot:
        order[static_cast<size_t>(found++)] = 1;
        break;
      case Channel::kZrot:
        order[static_cast<size_t>(found++)] = 2;
        break;
      default:
        break;
    }
    if (found == 3) break;
  }
  if (found != 3)
    throw std::runtime_error("joint " + j.name + " lacks three rotation channels");
  return order;
}

void Skeleton::validate() const {
  if (joints.empty()) throw std::runtime_error("skeleton has no joints");
  int roots = 0;
  for (size_t i = 0; i < joints.size(); ++i) {
    int p = joints[i].parent;
    if (p < 0) {
      ++roots;
    } else if (static_cast<size_t>(p) >= i) {
      throw std::runtime_error("skeleton parents must precede children");
    }
  }
  if (roots != 1) throw std::runtime_error("skeleton must have exactly one root");
}

namespace {

struct Tokenizer {
  std::vector<std::string> tokens;
  size_t pos = 0;

  explicit Tokenizer(const std::string& text) {
    std::istringstream is(text);
    std::string t;
    while (is >> t) tokens.push_back(t);
  }
  bool done() const { return pos >= tokens.size(); }
  const std::string& peek() const {
    if (done()) throw std::runtime_error("BVH: unexpected end of file");
    return tokens[pos];
  }
  std::string next() {
    if (done()) throw std::runtime_error("BVH: unexpected end of file");
    return tokens[pos++];
  }
  void expect(const std::string& want) {
    std::string got = next();
    if (got != want)
      throw std::runtime_error("BVH: expected '" + want + "', found '" + got + "'");
  }
  double number() {
    std::string t = next();
    size_t used = 0;
    double v = 0;
    try {
      v = std::stod(t, &used);
    } catch (...) {
      throw std::runtime_error("BVH: expected a number, found '" + t + "'");
    }
    if (used != t.size())
      throw std::runtime_error("BVH: malformed number '" + t + "'");
    return v;
  }
};

Channel parse_channel(const std::string& t) {
  if (t == "Xposition") return Channel::kXpos;
  if (t == "Yposition") return Channel::kYpos;
  if (t == "Zposition") return Channel::kZpos;
  if (t == "Xrotation") return Channel::kXrot;
  if (t == "Yrotation") return Channel::kYrot;
  if (t == "Zrotation") return Channel::kZrot;
  throw std::runtime_error("BVH: unknown channel token '" + t + "'");
}

const char* channel_name(Channel c) {
  switch (c) {
    case Channel::kXpos: return "Xposition";
    case Channel::kYpos: return "Yposition";
    case Channel::kZpos: return "Zposition";
    case Channel::kXrot: return "Xrotation";
    case Channel::kYrot: return "Yrotation";
    case Channel::kZrot: return "Zrotation";
  }
  return "";
}

void parse_joint(Tokenizer& tk, Skeleton& skel, int parent) {
  std::string kind = tk.next();  // ROOT / JOINT / End
  Joint j;
  j.parent = parent;
  if (kind == "End") {
    tk.expect("Site");
    j.name = "EndSite";
    j.end_site = true;
  } else if (kind == "ROOT" || kind == "JOINT") {
    j.name = tk.next();
  } else {
    throw std::runtime_error("BVH: expected ROOT/JOINT/End, found '" + kind + "'");
  }
  tk.expect("{");
  tk.expect("OFFSET");
  j.offset.x = tk.number();
  j.offset.y = tk.number();
  j.offset.z = tk.number();
  int self = static_cast<int>(skel.joints.size());
  if (!j.end_site) {
    tk.expect("CHANNELS");
    int n = static_cast<int>(tk.number());
    for (int i = 0; i < n; ++i) j.channels.push_back(parse_channel(tk.next()));
  }
  skel.joints.push_back(j);
  while (tk.peek() != "}") {
    const std::string& t = tk.peek();
    if (t == "JOINT" || t == "End") {
      parse_joint(tk, skel, self);
    } else {
      throw std::runtime_error("BVH: unexpected token '" + t + "' in joint block");
    }
  }
  tk.expect("}");
}

}  // namespace

MotionClip parse_bvh(const std::string& text) {
  Tokenizer tk(text);
  if (tk.done() || tk.peek() != "HIERARCHY")
    throw std::runtime_error("BVH: missing HIERARCHY section");
  tk.expect("HIERARCHY");
  MotionClip clip;
  if (tk.done() || tk.peek() != "ROOT")
    throw std::runtime_error("BVH: missing ROOT joint");
  parse_joint(tk, clip.skeleton, -1);
  clip.skeleton.validate();
  if (tk.done())
    throw std::runtime_error("BVH: missing MOTION section");
  tk.expect("MOTION");
  tk.expect("Frames:");
  int64_t n_frames = static_cast<int64_t>(tk.number());
  tk.expect("Frame");
  tk.expect("Time:");
  double frame_time = tk.number();
  if (frame_time <= 0) throw std::runtime_error("BVH: non-positive frame time");
  clip.fps = 1.0 / frame_time;
  int64_t n_ch = clip.skeleton.channel_count();
  if (n_frames < 1) throw std::runtime_error("BVH: no frames");
  clip.frames = Tensor({n_frames, n_ch});
  for (int64_t f = 0; f < n_frames; ++f)
    for (int64_t c = 0; c < n_ch; ++c) {
      if (tk.done())
        throw std::runtime_error(
            "BVH: frame data ends early (frame count mismatch)");
      clip.frames(f, c) = tk.number();
    }
  if (!tk.done())
    throw std::runtime_error("BVH: trailing data after declared frames");
  return clip;
}

MotionClip parse_bvh_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_bvh(ss.str());
}

namespace {

void write_joint(std::ostringstream& os, const Skeleton& skel, int idx,
                 int depth) {
  const Joint& j = skel.joints[static_cast<size_t>(idx)];
  std::string ind(static_cast<size_t>(depth) * 2, ' ');
  char buf[160];
  if (j.end_site) {
    os << ind << "End Site\n" << ind << "{\n";
    std::snprintf(buf, sizeof buf, "%s  OFFSET %.6f %.6f %.6f\n", ind.c_str(),
                  j.offset.x, j.offset.y, j.offset.z);
    os << buf << ind << "}\n";
    return;
  }
  os << ind << (j.parent < 0 ? "ROOT " : "JOINT ") << j.name << "\n" << ind << "{\n";
  std::snprintf(buf, sizeof buf, "%s  OFFSET %.6f %.6f %.6f\n", ind.c_str(),
                j.offset.x, j.offset.y, j.offset.z);
  os << buf;
  os << ind << "  CHANNELS " << j.channels.size();
  for (Channel c : j.channels) os << ' ' << channel_name(c);
  os << "\n";
  for (size_t c = 0; c < skel.joints.size(); ++c)
    if (skel.joints[c].parent == idx) write_joint(os, skel, static_cast<int>(c), depth + 1);
  os << ind << "}\n";
}

}  // namespace

std::string write_bvh(const MotionClip& clip) {
  std::ostringstream os;
  os << "HIERARCHY\n";
  write_joint(os, clip.skeleton, 0, 0);
  os << "MOTION\nFrames: " << clip.frame_count() << "\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "Frame Time: %.8f\n", 1.0 / clip.fps);
  os << buf;
  int64_t n_ch = clip.skeleton.channel_count();
  for (int64_t f = 0; f < clip.frame_count(); ++f) {
    for (int64_t c = 0; c < n_ch; ++c) {
      std::snprintf(buf, sizeof buf, "%.6f", clip.frames(f, c));
      os << (c ? " " : "") << buf;
    }
    os << "\n";
  }
  return os.str();
}

void write_bvh_file(const std::string& path, const MotionClip& clip) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << write_bvh(clip);
}

std::string skeleton_to_json(const Skeleton& s) {
  nlohmann::json j = nlohmann::json::array();
  for (const Joint& joint : s.joints) {
    nlohmann::json cj = nlohmann::json::array();
    for (Channel c : joint.channels) cj.push_back(channel_name(c));
    j.push_back({{"name", joint.name},
                 {"parent", joint.parent},
                 {"offset", {joint.offset.x, joint.offset.y, joint.offset.z}},
                 {"channels", cj},
                 {"end_site", joint.end_site}});
  }
  return j.dump();
}

Skeleton skeleton_from_json(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  Skeleton s;
  for (const auto& je : j) {
    Joint joint;
    joint.name = je.at("name").get<std::string>();
    joint.parent = je.at("parent").get<int>();
    joint.offset.x = je.at("offset")[0].get<double>();
    joint.offset.y = je.at("offset")[1].get<double>();
    joint.offset.z = je.at("offset")[2].get<double>();
    joint.end_site = je.at("end_site").get<bool>();
    for (const auto& c : je.at("channels"))
      joint.channels.push_back(parse_channel(c.get<std::string>()));
    s.joints.push_back(joint);
  }
  s.validate();
  return s;
}

}  // namespace dim
