#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace tcftl {

// Minimal RFC 4180 reader: comma separated, double-quote escaping, quoted
// fields may span lines. line() is the 1-based line the last record started on.
class CsvReader {
  public:
    explicit CsvReader(std::string_view text) : text_(text) {}

    bool next(std::vector<std::string>& fields) {
        fields.clear();
        if (pos_ >= text_.size()) return false;
        record_line_ = line_;
        std::string field;
        bool quoted = false;
        while (pos_ < text_.size()) {
            const char ch = text_[pos_++];
            if (quoted) {
                if (ch == '"') {
                    if (pos_ < text_.size() && text_[pos_] == '"') {
                        field.push_back('"');
                        ++pos_;
                    } else {
                        quoted = false;
                    }
                } else {
                    if (ch == '\n') ++line_;
                    field.push_back(ch);
                }
            } else if (ch == '"') {
                quoted = true;
            } else if (ch == ',') {
                fields.push_back(std::move(field));
                field.clear();
            } else if (ch == '\n') {
                ++line_;
                break;
            } else if (ch != '\r') {
                field.push_back(ch);
            }
        }
        fields.push_back(std::move(field));
        return true;
    }

    std::size_t line() const noexcept { return record_line_; }

  private:
    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::size_t record_line_ = 0;
};

}  // namespace tcftl
