#! /usr/bin/env python
import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import argparse
import glob
import os

panels = ['co_bss_ll_latency', 'co_bss_ll_dl_latency', 'co_bss_ll_ul_latency',
          'non_co_bss_ll_latency', 'co_bss_vc_latency', 'network_throughput']


def str2bool(v):
    return v.lower() in ("yes", "true", "t", "1")


def read_series(series_file):
    """
    lines after the header:
        vc_stas,coordinated,uncoordinated
    """
    vc_stas, coordinated, uncoordinated = [], [], []
    with open(series_file, 'r') as rf:
        next(rf)
        for line in rf:
            words = line.strip().split(",")
            vc_stas.append(int(words[0]))
            coordinated.append(float(words[1]))
            uncoordinated.append(float(words[2]))
    return vc_stas, coordinated, uncoordinated


def draw_series(plotdir, scenario, savefig=True):
    fig = plt.figure(figsize=(12, 7))
    for idx, panel in enumerate(panels):
        series_file = os.path.join(plotdir, "{}_{}.csv".format(scenario, panel))
        ax = fig.add_subplot(2, 3, idx + 1)
        ax.set_title(panel)
        if not os.path.exists(series_file):
            continue
        vc_stas, coordinated, uncoordinated = read_series(series_file)
        if panel == 'network_throughput':
            coordinated = [v / 1e6 for v in coordinated]
            uncoordinated = [v / 1e6 for v in uncoordinated]
            ax.set_ylabel('Mbit/s')
        else:
            coordinated = [v / 1e3 for v in coordinated]
            uncoordinated = [v / 1e3 for v in uncoordinated]
            ax.set_ylabel('p95 latency (ms)')
        ax.plot(vc_stas, coordinated, 'blue', marker='o')
        ax.plot(vc_stas, uncoordinated, 'orange', marker='s')
        ax.legend(['coordinated', 'uncoordinated'])
        ax.set_xlabel('VC STAs per BSS')
        ax.set_xticks(vc_stas)

    plt.subplots_adjust(wspace=0.35, hspace=0.4)
    if savefig:
        plt.savefig(os.path.join(plotdir, scenario + '.png'))
    else:
        plt.show()


if __name__ == "__main__":
    argv = argparse.ArgumentParser()
    argv.add_argument('-i', '--plotdir', required=True,
                      help="directory of the plot-data files of 'mapcsim sweep --format plot-data'")
    argv.add_argument('--scenario', required=False, default=None,
                      help="RTMG or VR, default every scenario found in plotdir")
    argv.add_argument('--is_save', required=False, default="yes")
    argv = argv.parse_args()
    if argv.scenario is not None:
        scenarios = [argv.scenario]
    else:
        scenarios = sorted(set(os.path.basename(f).split("_")[0]
                               for f in glob.glob(os.path.join(argv.plotdir, "*_network_throughput.csv"))))
    for scenario in scenarios:
        draw_series(argv.plotdir, scenario, str2bool(argv.is_save))
