#include "pmf/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace pmf {

void Checkpoint::add(const std::string& name, const Tensor& t) {
    if (name.empty() || name.find(' ') != std::string::npos)
        throw ConfigError("checkpoint tensor name must be nonempty and space-free: '" + name + "'");
    if (has(name)) throw ConfigError("duplicate checkpoint tensor: " + name);
    tensors.emplace_back(name, t);
}

bool Checkpoint::has(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return true;
    return false;
}

const Tensor& Checkpoint::get(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return t;
    throw ParseError("checkpoint tensor not found: " + name);
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    out << "pmf-checkpoint v1\n";
    if (!ckpt.meta.empty()) {
        if (ckpt.meta.find('\n') != std::string::npos)
            throw ConfigError("checkpoint meta must be a single line");
        out << "meta " << ckpt.meta << '\n';
    }
    char buf[40];
    for (const auto& [name, t] : ckpt.tensors) {
        out << "tensor " << name << ' ' << t.ndim();
        for (std::size_t d : t.shape()) out << ' ' << d;
        out << '\n';
        const auto& v = t.values();
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) out << ' ';
            std::snprintf(buf, sizeof(buf), "%.17g", v[i]);
            out << buf;
        }
        out << '\n';
    }
    out << "end\n";
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read checkpoint: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "pmf-checkpoint v1")
        throw ParseError("bad checkpoint header in " + path);
    Checkpoint ckpt;
    bool saw_end = false;
    while (std::getline(in, line)) {
        if (line == "end") {
            saw_end = true;
            break;
        }
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "meta") {
            std::getline(ls, ckpt.meta);
            if (!ckpt.meta.empty() && ckpt.meta.front() == ' ') ckpt.meta.erase(0, 1);
        } else if (tag == "tensor") {
            std::string name;
            std::size_t ndim = 0;
            if (!(ls >> name >> ndim)) throw ParseError("bad tensor record: " + line);
            Shape shape(ndim);
            for (auto& d : shape)
                if (!(ls >> d)) throw ParseError("bad tensor shape: " + line);
            std::string values_line;
            if (!std::getline(in, values_line))
                throw ParseError("missing values for tensor " + name);
            std::vector<double> values;
            values.reserve(shape_size(shape));
            std::istringstream vs(values_line);
            double x;
            while (vs >> x) values.push_back(x);
            if (values.size() != shape_size(shape))
                throw ParseError("value count mismatch for tensor " + name);
            ckpt.add(name, Tensor::from_values(shape, std::move(values)));
        } else {
            throw ParseError("unknown checkpoint record: " + line);
        }
    }
    if (!saw_end) throw ParseError("truncated checkpoint: " + path);
    return ckpt;
}

}  // namespace pmf
