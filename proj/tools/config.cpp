#include "cli.hpp"

namespace gedmd::cli {

Node::Node(const nlohmann::json& value, nlohmann::json& resolved, std::string path)
    : value_(&value), resolved_(&resolved), path_(std::move(path))
{
}

bool Node::has(const std::string& key) const
{
    return value_->is_object() && value_->contains(key);
}

std::size_t Node::size() const
{
    return value_->is_array() || value_->is_object() ? value_->size() : 0;
}

void Node::fail(const std::string& key, const std::string& message) const
{
    const std::string where = key.empty() ? path_ : (path_.empty() ? key : path_ + "." + key);
    throw UsageError(where + ": " + message);
}

const nlohmann::json& Node::field(const std::string& key) const
{
    if (!value_->is_object())
        fail("", "expected an object");
    if (!value_->contains(key))
        fail(key, "missing required field");
    return value_->at(key);
}

void Node::record(const std::string& key, const nlohmann::json& value) const
{
    if (resolved_->is_null())
        *resolved_ = nlohmann::json::object();
    if (resolved_->is_object() && !resolved_->contains(key))
        (*resolved_)[key] = value;
}

Node Node::child(const std::string& key) const
{
    const auto& v = field(key);
    if (!v.is_object())
        fail(key, "expected an object");
    return Node(v, (*resolved_)[key], path_.empty() ? key : path_ + "." + key);
}

Node Node::optional_child(const std::string& key) const
{
    static const nlohmann::json empty = nlohmann::json::object();
    if (!has(key)) {
        record(key, nlohmann::json::object());
        return Node(empty, (*resolved_)[key], path_.empty() ? key : path_ + "." + key);
    }
    return child(key);
}

Node Node::at(std::size_t index) const
{
    if (!value_->is_array() || index >= value_->size())
        fail("", "index " + std::to_string(index) + " out of range");
    return Node(value_->at(index), resolved_->at(index), path_ + "[" + std::to_string(index) + "]");
}

double Node::number(const std::string& key) const
{
    const auto& v = field(key);
    if (!v.is_number())
        fail(key, "expected a number");
    return v.get<double>();
}

double Node::number(const std::string& key, double fallback) const
{
    if (!has(key)) {
        record(key, fallback);
        return fallback;
    }
    return number(key);
}

long long Node::integer(const std::string& key) const
{
    const auto& v = field(key);
    if (!v.is_number_integer())
        fail(key, "expected an integer");
    return v.get<long long>();
}

long long Node::integer(const std::string& key, long long fallback) const
{
    if (!has(key)) {
        record(key, fallback);
        return fallback;
    }
    return integer(key);
}

bool Node::boolean(const std::string& key, bool fallback) const
{
    if (!has(key)) {
        record(key, fallback);
        return fallback;
    }
    const auto& v = field(key);
    if (!v.is_boolean())
        fail(key, "expected true or false");
    return v.get<bool>();
}

std::string Node::string(const std::string& key) const
{
    const auto& v = field(key);
    if (!v.is_string())
        fail(key, "expected a string");
    return v.get<std::string>();
}

std::string Node::string(const std::string& key, const std::string& fallback) const
{
    if (!has(key)) {
        record(key, fallback);
        return fallback;
    }
    return string(key);
}

std::vector<double> Node::numbers(const std::string& key) const
{
    const auto& v = field(key);
    if (!v.is_array())
        fail(key, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number())
            fail(key + "[" + std::to_string(i) + "]", "expected a number");
        out.push_back(v[i].get<double>());
    }
    return out;
}

std::vector<double> Node::numbers(const std::string& key, const std::vector<double>& fallback) const
{
    if (!has(key)) {
        record(key, fallback);
        return fallback;
    }
    return numbers(key);
}

}  // namespace gedmd::cli
