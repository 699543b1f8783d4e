//! Run the benchmark suite with two strategies and compare the runs.
use slotwise::corpus::{BenchSpec, Kernel};
use slotwise::report::{compare, run_suite, suite_csv, Strategy, SuiteConfig};

fn main() -> anyhow::Result<()> {
    let specs = [
        BenchSpec::new(Kernel::DotProduct, 4),
        BenchSpec::new(Kernel::Hamming, 4),
        BenchSpec::new(Kernel::BoxBlur, 3),
    ];
    let run = |s: Strategy| {
        suite_csv(&run_suite(
            &specs,
            &SuiteConfig {
                strategies: vec![s],
                ..Default::default()
            },
        ))
    };
    let naive = run(Strategy::None);
    let opt = run(Strategy::Beam(8));
    print!("{opt}");
    // rows are keyed by (kernel, strategy), so rename before comparing
    print!("{}", compare(&naive.replace(",none,", ",x,"), &opt.replace(",beam8,", ",x,"))?);
    Ok(())
}
