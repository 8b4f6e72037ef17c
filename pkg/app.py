"""
時空最小平方法薛丁格求解工具
以全域時空最小平方泛函求解時間相依薛丁格方程：秩 r 矩陣 (ALS) 與高斯波包 (貪婪演算法)，
並附投影分裂、RK4、截斷 SVD 與 Strang 正弦頻譜等比較基準
"""
import os
import sys
import logging
import argparse

from dotenv import load_dotenv

from handlers.config_handler import ConfigError, ParameterError, UnknownExperimentError, load_config
from handlers.experiment_handler import NUMERICAL_ERRORS, run_experiment
from handlers.utils import get_timestamp, prepare_output_dirs, write_json
from handlers.verify_handler import SUITES, run_suite

# 載入環境變數
load_dotenv()

# 設定日誌
logging.basicConfig(
    level=getattr(logging, os.environ.get('LOG_LEVEL', 'INFO').upper(), logging.INFO),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[
        logging.StreamHandler()
    ]
)
logger = logging.getLogger(__name__)

# 結束碼
EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_PARSE = 2
EXIT_UNKNOWN_EXPERIMENT = 3
EXIT_PARAMETER = 4
EXIT_NUMERICAL = 5
EXIT_VERIFY = 6

EXIT_CODES_HELP = """結束碼:
  0  成功
  1  未預期的錯誤
  2  設定檔無法解析
  3  未知的實驗名稱
  4  參數值或範圍無效
  5  數值失敗 (CG 未收斂、矩陣非正定、波包寬度無效)
  6  驗證項目未通過

環境變數: OUT_DIR (預設 runs)、THREADS (預設 1)、LOG_LEVEL (預設 INFO)、SEED
"""


def build_parser():
    parser = argparse.ArgumentParser(
        prog='app.py',
        description='時空最小平方法薛丁格求解工具',
        epilog=EXIT_CODES_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument('--seed', type=int, default=None, help='覆寫設定檔的亂數種子')
    parser.add_argument('--out-dir', default=None, help='輸出目錄 (預設 $OUT_DIR/<實驗名稱>)')
    parser.add_argument('--threads', type=int, default=None, help='平行執行實驗分支的執行緒數')
    sub = parser.add_subparsers(dest='command', required=True)

    run = sub.add_parser('run', help='執行設定檔指定的實驗')
    run.add_argument('config', help='實驗設定檔 (.cfg)')

    verify = sub.add_parser('verify', help='執行驗證項目')
    verify.add_argument('suite', choices=list(SUITES) + ['all'], help='驗證項目名稱')
    return parser


def _env_int(name, default):
    value = os.environ.get(name)
    if value is None or value == '':
        return default
    try:
        return int(value)
    except ValueError:
        raise ParameterError(f"環境變數 {name} 必須為整數: {value!r}") from None


def _attach_log_file(out_dir):
    handler = logging.FileHandler(os.path.join(out_dir, 'run.log'), encoding='utf-8')
    handler.setFormatter(logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s'))
    logging.getLogger().addHandler(handler)
    return handler


def command_run(args):
    """執行實驗；設定檔在建立輸出目錄前完成驗證"""
    seed = args.seed if args.seed is not None else _env_int('SEED', None)
    threads = args.threads if args.threads is not None else _env_int('THREADS', 1)
    if threads < 1:
        raise ParameterError(f"執行緒數必須 >= 1: {threads}")
    config = load_config(args.config, seed=seed)
    out_dir = args.out_dir or os.path.join(os.environ.get('OUT_DIR', 'runs'), config.name)

    prepare_output_dirs(out_dir)
    handler = _attach_log_file(out_dir)
    try:
        run_experiment(config, out_dir, threads=threads)
    finally:
        logging.getLogger().removeHandler(handler)
        handler.close()
    return EXIT_OK


def command_verify(args):
    """執行驗證項目；全部通過時回傳 0"""
    seed = args.seed if args.seed is not None else _env_int('SEED', 0)
    results = run_suite(args.suite, seed=seed)
    if args.out_dir:
        prepare_output_dirs(args.out_dir)
        write_json(os.path.join(args.out_dir, f"verify_{args.suite}.json"), {
            'suite': args.suite,
            'seed': seed,
            'finished_at': get_timestamp(),
            'results': [r.to_dict() for r in results],
        })
    failed = [r.name for r in results if not r.passed]
    if failed:
        logger.error(f"驗證未通過: {', '.join(failed)}")
        return EXIT_VERIFY
    logger.info("所有驗證項目通過")
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == 'run':
            return command_run(args)
        return command_verify(args)
    except ConfigError as e:
        logger.error(f"設定檔無法解析: {str(e)}")
        return EXIT_PARSE
    except UnknownExperimentError as e:
        logger.error(f"未知的實驗: {str(e)}")
        return EXIT_UNKNOWN_EXPERIMENT
    except ParameterError as e:
        logger.error(f"參數無效: {str(e)}")
        return EXIT_PARAMETER
    except NUMERICAL_ERRORS as e:
        logger.error(f"數值計算失敗: {str(e)}", exc_info=True)
        return EXIT_NUMERICAL
    except Exception as e:
        logger.error(f"執行時發生未預期的錯誤: {str(e)}", exc_info=True)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
