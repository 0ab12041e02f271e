#include "aclust/pipeline.hpp"

#include <exception>
#include <thread>

namespace aclust {

std::uint64_t ingest(RecordReader& reader, Engine& engine, std::size_t queue_capacity) {
    std::uint64_t processed = 0;
    if (queue_capacity == 0) {
        while (auto tx = reader.next()) {
            engine.process_transaction(*tx);
            ++processed;
        }
        return processed;
    }

    BoundedQueue<TxRecord> queue(queue_capacity);
    std::exception_ptr parse_error;
    std::thread parser([&] {
        try {
            while (auto tx = reader.next()) {
                if (!queue.push(std::move(*tx))) return;
            }
        } catch (...) {
            parse_error = std::current_exception();
        }
        queue.close();
    });

    std::exception_ptr engine_error;
    try {
        while (auto tx = queue.pop()) {
            engine.process_transaction(*tx);
            ++processed;
        }
    } catch (...) {
        engine_error = std::current_exception();
        queue.close();
    }
    parser.join();
    // The engine failed on an earlier record than anything the parser saw later.
    if (engine_error) std::rethrow_exception(engine_error);
    if (parse_error) std::rethrow_exception(parse_error);
    return processed;
}

}  // namespace aclust
