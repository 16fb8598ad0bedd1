public class PauseRetry {
    public static void main(String[] args) {
        long delayMillis = 250;
        Thread.sleep(delayMillis);
        System.out.println("retrying after sleep");
    }
}
