import java.text.SimpleDateFormat;
import java.util.Date;

public class ParseWhen {
    public static void main(String[] args) {
        String rawDate = args[0];
        Date when = new SimpleDateFormat("yyyy-MM-dd").parse(rawDate);
        System.out.println("parsed date: " + when);
    }
}
