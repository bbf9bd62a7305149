import os
from dotenv import load_dotenv

basedir = os.path.abspath(os.path.dirname(__file__))
load_dotenv(os.path.join(basedir, '.env'))


class Config:
    # Каталоги данных и результатов
    CCC_DATA_DIR = os.environ.get('CCC_DATA_DIR') or os.path.join(basedir, 'data')
    CCC_OUT_DIR = os.environ.get('CCC_OUT_DIR') or os.path.join(basedir, 'runs')

    # Логирование
    CCC_LOG_CONFIG = os.environ.get('CCC_LOG_CONFIG') or os.path.join(basedir, 'logging.ini')
    CCC_LOG_LEVEL = os.environ.get('CCC_LOG_LEVEL') or 'INFO'

    # Проверка NaN/Inf на каждой операции autodiff (медленно)
    CCC_STRICT = os.environ.get('CCC_STRICT', 'false').lower() in ('1', 'true', 'yes')

    # Потоки для чтения WAV
    CCC_WORKERS = int(os.environ.get('CCC_WORKERS') or 4)
