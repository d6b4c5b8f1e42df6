#include "duplexsim/timing.hpp"

#include "duplexsim/vad.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace duplexsim {

TimingReport measure_timings(const StageTrace& trace, const FrameStream& user, int delta) {
    TimingReport report;

    std::vector<double> speech_times;
    for (const BlockTrace& bt : trace.blocks) {
        const bool speaks = std::any_of(bt.emitted.begin(), bt.emitted.end(),
                                        [](FrameLabel f) { return f != kSilence; });
        if (!speaks) continue;
        if (bt.first_speech_time < 0 || bt.t_end < bt.t_start) {
            throw std::invalid_argument("measure_timings: block " + std::to_string(bt.block) +
                                        " emitted speech without timing events");
        }
        speech_times.push_back(bt.first_speech_time);
        report.block_waits.push_back(bt.first_speech_time - bt.input_end_time);
    }
    std::sort(speech_times.begin(), speech_times.end());

    for (const TurnSegment& seg : vad_segment(user, delta)) {
        const double end_time = static_cast<double>(seg.buffer_end) / user.fps;
        const auto it = std::lower_bound(speech_times.begin(), speech_times.end(), end_time);
        if (it == speech_times.end()) continue; // no response after this segment
        SegmentTiming st;
        st.segment = seg.index;
        st.user_end_time = end_time;
        st.wait = *it - end_time;
        st.duration_s = static_cast<double>(seg.buffer_frames()) / user.fps;
        st.rtf = st.duration_s > 0 ? st.wait / st.duration_s : 0.0;
        report.segments.push_back(st);
    }

    const auto mean = [](const std::vector<double>& v) {
        if (v.empty()) return 0.0;
        double sum = 0;
        for (const double x : v) sum += x;
        return sum / static_cast<double>(v.size());
    };
    report.block_wait_mean = mean(report.block_waits);
    std::vector<double> waits;
    std::vector<double> rtfs;
    for (const SegmentTiming& st : report.segments) {
        waits.push_back(st.wait);
        rtfs.push_back(st.rtf);
    }
    report.wait_mean = mean(waits);
    report.rtf_mean = mean(rtfs);
    return report;
}

} // namespace duplexsim
